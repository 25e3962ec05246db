//! Timed model of a batch production machine.
//!
//! The machine is modelled as a chain automaton: state `q_i` means `i` parts
//! have been produced so far, and event `b` produces a batch of `b` parts
//! (`b = 0` is an idle/setup slot). Two clocks accompany a run: a local clock
//! that is reset on every transition and a global clock that accumulates the
//! local dwell times. Production milestones become deadline constraints on
//! the global clock, attached to the part count at which they apply.
//!
//! All public timing APIs speak grid time: decimal hours on the electricity
//! grid's timeline (e.g. `8.0` is 8 am). Milestone deadlines are stored
//! relative to the order's start time and converted internally.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Structural errors raised when driving the automaton.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PtaError {
    /// A state index beyond the model's last state was supplied.
    #[error("state q{state} does not exist; the highest state is q{max}")]
    InvalidState { state: usize, max: usize },
    /// An event would push the cumulative part count past demand plus the
    /// allocated inventory surplus.
    #[error("event {event} at position {index} drives state q{state} past capacity q{max}")]
    CapacityExceeded {
        state: usize,
        event: usize,
        index: usize,
        max: usize,
    },
    /// An event index larger than the machine's batch capacity.
    #[error("event {event} exceeds the largest batch size {max}")]
    InvalidEvent { event: usize, max: usize },
    /// Two idle events in a row; an idle directly after an idle has no
    /// defined cost and is rejected structurally.
    #[error("consecutive idle events at position {index}")]
    ConsecutiveIdle { index: usize },
}

/// Validation failure for a machine or order description.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {message}")]
pub struct SpecError {
    pub field: &'static str,
    pub message: String,
}

impl SpecError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

/// Static description of the batch machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MachineSpec<T: Scalar> {
    /// Largest batch size the machine can process at once (`H`).
    pub capacity: usize,
    /// Duration of one batch run, regardless of batch size, in hours.
    pub processing_time_h: T,
    /// Duration of an idle (set-up) slot, in hours.
    pub setup_time_h: T,
    /// Electrical power drawn per batch size, indexed by size `0..=capacity`,
    /// in MW. Entry 0 is the idle/set-up power.
    pub power_map_mw: Vec<T>,
    /// Size of the downstream inventory buffer (`r`).
    pub inventory_capacity: usize,
    /// Portion of the buffer this order may fill with surplus parts (`v`).
    pub allocated_inventory: usize,
}

impl<T: Scalar> MachineSpec<T> {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.capacity == 0 {
            return Err(SpecError::new("capacity", "must be at least 1"));
        }
        if !(self.processing_time_h.is_finite() && self.processing_time_h > T::zero()) {
            return Err(SpecError::new("processing_time_h", "must be positive and finite"));
        }
        if !(self.setup_time_h.is_finite() && self.setup_time_h > T::zero()) {
            return Err(SpecError::new("setup_time_h", "must be positive and finite"));
        }
        if self.power_map_mw.len() != self.capacity + 1 {
            return Err(SpecError::new(
                "power_map_mw",
                format!(
                    "needs one entry per batch size 0..={}, got {}",
                    self.capacity,
                    self.power_map_mw.len()
                ),
            ));
        }
        for (i, p) in self.power_map_mw.iter().enumerate() {
            if !(p.is_finite() && *p >= T::zero()) {
                return Err(SpecError::new(
                    "power_map_mw",
                    format!("entry {i} must be non-negative and finite"),
                ));
            }
            if i > 0 && *p < self.power_map_mw[i - 1] {
                return Err(SpecError::new(
                    "power_map_mw",
                    format!("must be non-decreasing in batch size, violated at entry {i}"),
                ));
            }
        }
        if self.allocated_inventory > self.inventory_capacity {
            return Err(SpecError::new(
                "allocated_inventory",
                format!(
                    "exceeds inventory capacity ({} > {})",
                    self.allocated_inventory, self.inventory_capacity
                ),
            ));
        }
        Ok(())
    }
}

/// One production milestone: `quantity` parts must exist no later than
/// `deadline_h` hours after the order's start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Milestone<T: Scalar> {
    pub quantity: usize,
    pub deadline_h: T,
}

/// A production order: when work starts, how many parts are due, and the
/// intermediate milestones along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OrderSpec<T: Scalar> {
    /// Grid time at which production may begin, in decimal hours.
    pub start_time_h: T,
    /// Total number of parts ordered (`d`). A zero-demand order is legal and
    /// yields a trivially complete run.
    pub total_demand: usize,
    /// Milestones sorted by quantity; deadlines are hours after start.
    #[serde(default = "Vec::new")]
    pub milestones: Vec<Milestone<T>>,
}

impl<T: Scalar> OrderSpec<T> {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.start_time_h.is_finite() && self.start_time_h >= T::zero()) {
            return Err(SpecError::new("start_time_h", "must be non-negative and finite"));
        }
        for (i, m) in self.milestones.iter().enumerate() {
            if m.quantity == 0 {
                return Err(SpecError::new(
                    "milestones",
                    format!("milestone {i} has zero quantity"),
                ));
            }
            if m.quantity > self.total_demand {
                return Err(SpecError::new(
                    "milestones",
                    format!(
                        "milestone {i} asks for {} parts but only {} are ordered",
                        m.quantity, self.total_demand
                    ),
                ));
            }
            if !(m.deadline_h.is_finite() && m.deadline_h > T::zero()) {
                return Err(SpecError::new(
                    "milestones",
                    format!("milestone {i} deadline must be positive and finite"),
                ));
            }
            if i > 0 {
                let prev = &self.milestones[i - 1];
                if m.quantity <= prev.quantity {
                    return Err(SpecError::new(
                        "milestones",
                        format!("quantities must be strictly increasing, violated at milestone {i}"),
                    ));
                }
                if m.deadline_h <= prev.deadline_h {
                    return Err(SpecError::new(
                        "milestones",
                        format!("deadlines must be strictly increasing, violated at milestone {i}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The kinds of clock constraint the model supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Upper bound on the global clock when a part-count threshold is first
    /// crossed.
    GlobalDeadline,
}

/// A deadline on the global clock, attached to the part count at which it
/// applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClockConstraint<T: Scalar> {
    pub kind: ConstraintKind,
    /// Part-count threshold that triggers the check.
    pub applies_at: usize,
    /// Deadline in hours after the order's start time.
    pub bound_h: T,
}

/// Local and global clock valuations carried through a run. The local clock
/// is reset on every transition; the global clock accumulates dwell times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClockState<T: Scalar> {
    pub local_h: T,
    pub global_h: T,
}

impl<T: Scalar> ClockState<T> {
    pub fn zero() -> Self {
        Self {
            local_h: T::zero(),
            global_h: T::zero(),
        }
    }

    /// Lets `duration` hours pass in the current state.
    pub fn elapse(self, duration: T) -> Self {
        Self {
            local_h: self.local_h + duration,
            global_h: self.global_h + duration,
        }
    }

    /// Applies the reset that accompanies every transition.
    pub fn reset_local(self) -> Self {
        Self {
            local_h: T::zero(),
            global_h: self.global_h,
        }
    }
}

/// A sequence of batch-size events. The one structural invariant is that two
/// idle events never appear back to back.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ScheduleString(Vec<usize>);

impl ScheduleString {
    pub fn new(events: Vec<usize>) -> Result<Self, PtaError> {
        if let Some(pos) = events.windows(2).position(|w| w[0] == 0 && w[1] == 0) {
            return Err(PtaError::ConsecutiveIdle { index: pos + 1 });
        }
        Ok(Self(events))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn events(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Joins two strings, re-checking the seam for a double idle.
    pub fn concat(&self, other: &Self) -> Result<Self, PtaError> {
        let mut events = self.0.clone();
        events.extend_from_slice(&other.0);
        Self::new(events)
    }
}

impl TryFrom<Vec<usize>> for ScheduleString {
    type Error = PtaError;

    fn try_from(events: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(events)
    }
}

impl fmt::Display for ScheduleString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "]")
    }
}

impl<'de> Deserialize<'de> for ScheduleString {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        let events = Vec::<usize>::deserialize(deserializer)?;
        ScheduleString::new(events).map_err(serde::de::Error::custom)
    }
}

/// Grid-time interval occupied by one event of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EventTiming<T: Scalar> {
    pub event_index: usize,
    pub start_h: T,
    pub end_h: T,
}

/// Outcome of checking a schedule against the model's deadline constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintCheck<T: Scalar> {
    Valid,
    Violated {
        constraint: ClockConstraint<T>,
        /// Grid time at which the violation materialised: the late crossing,
        /// or the end of the string if the threshold was never reached.
        at_h: T,
    },
}

impl<T: Scalar> ConstraintCheck<T> {
    pub fn is_valid(&self) -> bool {
        matches!(self, ConstraintCheck::Valid)
    }
}

/// The complete machine-plus-order model: states `q_0..q_{d+v}`, events
/// `0..=capacity`, marked states `q_d..q_{d+v}`, and the milestone deadlines
/// as clock constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PtaModel<T: Scalar> {
    machine: MachineSpec<T>,
    order: OrderSpec<T>,
    constraints: Vec<ClockConstraint<T>>,
}

impl<T: Scalar> PtaModel<T> {
    pub fn new(machine: MachineSpec<T>, order: OrderSpec<T>) -> Result<Self, SpecError> {
        machine.validate()?;
        order.validate()?;
        let constraints = order
            .milestones
            .iter()
            .map(|m| ClockConstraint {
                kind: ConstraintKind::GlobalDeadline,
                applies_at: m.quantity,
                bound_h: m.deadline_h,
            })
            .collect();
        Ok(Self {
            machine,
            order,
            constraints,
        })
    }

    pub fn machine(&self) -> &MachineSpec<T> {
        &self.machine
    }

    pub fn order(&self) -> &OrderSpec<T> {
        &self.order
    }

    /// Deadline constraints sorted by the part count at which they apply.
    pub fn constraints(&self) -> &[ClockConstraint<T>] {
        &self.constraints
    }

    /// Number of parts ordered (`d`).
    pub fn demand(&self) -> usize {
        self.order.total_demand
    }

    /// Highest reachable state: demand plus allocated inventory surplus.
    pub fn max_state(&self) -> usize {
        self.order.total_demand + self.machine.allocated_inventory
    }

    /// Largest batch size (`H`).
    pub fn max_event(&self) -> usize {
        self.machine.capacity
    }

    /// Grid time at which production may begin.
    pub fn start_time_h(&self) -> T {
        self.order.start_time_h
    }

    /// A state is marked once demand is met, up to the inventory surplus.
    pub fn is_marked(&self, state: usize) -> bool {
        state >= self.order.total_demand && state <= self.max_state()
    }

    /// Wall-clock duration of one event: set-up time for an idle, the batch
    /// processing time otherwise.
    pub fn event_duration(&self, event: usize) -> Result<T, PtaError> {
        if event > self.max_event() {
            return Err(PtaError::InvalidEvent {
                event,
                max: self.max_event(),
            });
        }
        Ok(if event == 0 {
            self.machine.setup_time_h
        } else {
            self.machine.processing_time_h
        })
    }

    /// Electrical power drawn while an event runs.
    pub fn power_mw(&self, event: usize) -> Result<T, PtaError> {
        self.machine
            .power_map_mw
            .get(event)
            .copied()
            .ok_or(PtaError::InvalidEvent {
                event,
                max: self.max_event(),
            })
    }

    /// Runs a schedule from `from_state` and returns the terminal state: the
    /// starting part count plus every batch in the string.
    pub fn transition(&self, from_state: usize, s: &ScheduleString) -> Result<usize, PtaError> {
        if from_state > self.max_state() {
            return Err(PtaError::InvalidState {
                state: from_state,
                max: self.max_state(),
            });
        }
        let mut state = from_state;
        for (index, event) in s.iter().enumerate() {
            if event > self.max_event() {
                return Err(PtaError::InvalidEvent {
                    event,
                    max: self.max_event(),
                });
            }
            if state + event > self.max_state() {
                return Err(PtaError::CapacityExceeded {
                    state,
                    event,
                    index,
                    max: self.max_state(),
                });
            }
            state += event;
        }
        Ok(state)
    }

    /// Start and end grid times of every event when `s` begins at
    /// `start_h`. The global clock telescopes: each event's end time is
    /// the next one's start.
    pub fn transition_timings(
        &self,
        from_state: usize,
        start_h: T,
        s: &ScheduleString,
    ) -> Result<Vec<EventTiming<T>>, PtaError> {
        // Validates states/events up front so timing never observes an
        // impossible prefix.
        self.transition(from_state, s)?;
        let mut clocks = ClockState::zero();
        let mut timings = Vec::with_capacity(s.len());
        for (event_index, event) in s.iter().enumerate() {
            let duration = self.event_duration(event)?;
            let begin = start_h + clocks.global_h;
            clocks = clocks.elapse(duration).reset_local();
            timings.push(EventTiming {
                event_index,
                start_h: begin,
                end_h: start_h + clocks.global_h,
            });
        }
        Ok(timings)
    }

    /// Checks every milestone deadline against a schedule that starts in
    /// `from_state` at grid time `start_h`.
    ///
    /// A milestone is satisfied when the first prefix whose part count
    /// reaches its threshold ends no later than the deadline. Milestones
    /// whose threshold was already crossed before `from_state` are settled
    /// history and are skipped. A milestone that is still unreached at the
    /// end of the string is pending — and therefore fine — unless its
    /// deadline has already elapsed by then.
    pub fn check_constraints(
        &self,
        from_state: usize,
        start_h: T,
        s: &ScheduleString,
    ) -> Result<ConstraintCheck<T>, PtaError> {
        self.transition(from_state, s)?;
        let tol = T::tol();
        let t0 = self.order.start_time_h;
        let mut end_h = start_h;
        // Crossing time per constraint, discovered in one pass over the string.
        let mut crossings: Vec<Option<T>> = vec![None; self.constraints.len()];
        let mut state = from_state;
        for event in s.iter() {
            end_h = end_h + self.event_duration(event)?;
            let next = state + event;
            for (ci, c) in self.constraints.iter().enumerate() {
                if c.applies_at > state && c.applies_at <= next && crossings[ci].is_none() {
                    crossings[ci] = Some(end_h);
                }
            }
            state = next;
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            if c.applies_at <= from_state {
                continue; // crossed before this schedule began
            }
            let deadline = t0 + c.bound_h;
            match crossings[ci] {
                Some(at_h) => {
                    if at_h > deadline + tol {
                        return Ok(ConstraintCheck::Violated {
                            constraint: c.clone(),
                            at_h,
                        });
                    }
                }
                None => {
                    if end_h > deadline + tol {
                        return Ok(ConstraintCheck::Violated {
                            constraint: c.clone(),
                            at_h: end_h,
                        });
                    }
                }
            }
        }
        Ok(ConstraintCheck::Valid)
    }

    /// Events available from a state: every batch size that fits within
    /// capacity, minus an idle directly after an idle. Marked states end the
    /// run, so nothing is available from them.
    pub fn feasible_events(&self, state: usize, last_event: Option<usize>) -> Vec<usize> {
        if state > self.max_state() || self.is_marked(state) {
            return Vec::new();
        }
        (0..=self.max_event())
            .filter(|&b| state + b <= self.max_state())
            .filter(|&b| !(b == 0 && last_event == Some(0)))
            .collect()
    }
}
