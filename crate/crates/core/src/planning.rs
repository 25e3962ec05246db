//! System-level planning: building the production model from specs and
//! tracking a running order as disturbances arrive.
//!
//! A [`RuntimeContext`] owns everything the controller needs between two
//! decisions: the model, the prices currently in force, the machine's state,
//! and the queue of not-yet-applied disturbances. Price updates are spliced
//! into the tariff from their effective instant; order updates rebuild the
//! model around the parts already produced. Neither may rewrite billed
//! history.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pta::{MachineSpec, OrderSpec, PtaModel, SpecError};
use crate::scalar::Scalar;
use crate::tariff::{PriceSchedule, TariffError};

/// Errors raised while building or updating the planning model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Tariff(#[from] TariffError),
    /// The disturbance is dated inside already-billed time.
    #[error("disturbance at {at_h}h predates executed work (billed through {billed_until_h}h)")]
    RetroactiveUpdate { at_h: f64, billed_until_h: f64 },
    /// The disturbance is structurally valid JSON but contradicts the run.
    #[error("cannot apply update at {at_h}h: {message}")]
    InvalidUpdate { at_h: f64, message: String },
}

/// A runtime change to the world the controller must absorb: either new
/// electricity prices from some instant on, or a revised order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Disturbance<T: Scalar> {
    /// Grid instant at which the change takes effect.
    pub at_h: T,
    #[serde(flatten)]
    pub kind: DisturbanceKind<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum DisturbanceKind<T: Scalar> {
    /// Prices are replaced from the effective instant onward.
    TariffUpdate(PriceSchedule<T>),
    /// The order (demand and/or milestones) is revised.
    OrderUpdate(OrderSpec<T>),
}

/// On-disk shape of a disturbance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DisturbanceSet<T: Scalar> {
    pub disturbances: Vec<Disturbance<T>>,
}

/// Builds the automaton model for a machine/order pair.
pub fn init_model<T: Scalar>(
    machine: MachineSpec<T>,
    order: OrderSpec<T>,
) -> Result<PtaModel<T>, SpecError> {
    PtaModel::new(machine, order)
}

/// Everything the controller carries between two decisions.
#[derive(Debug, Clone)]
pub struct RuntimeContext<T: Scalar> {
    pub model: PtaModel<T>,
    pub prices: PriceSchedule<T>,
    /// Parts produced so far.
    pub current_state: usize,
    /// Batch size of the most recent event, if any.
    pub last_event: Option<usize>,
    /// Grid time of the next decision boundary.
    pub grid_clock_h: T,
    /// Grid time through which energy has been billed; disturbances dated
    /// earlier than this are retroactive and rejected.
    pub billed_until_h: T,
    /// Not-yet-applied disturbances, sorted by effective instant (stable for
    /// equal instants).
    pending: Vec<Disturbance<T>>,
}

impl<T: Scalar> RuntimeContext<T> {
    /// A fresh context at the order's start: no parts produced, clock at the
    /// order's start time.
    pub fn new(
        model: PtaModel<T>,
        prices: PriceSchedule<T>,
        disturbances: Vec<Disturbance<T>>,
    ) -> Result<Self, PlanError> {
        let start = model.start_time_h();
        Self::at(model, prices, 0, None, start, disturbances)
    }

    /// A context resumed mid-run, e.g. a controller started at a splice
    /// point for counterfactual analysis.
    pub fn at(
        model: PtaModel<T>,
        prices: PriceSchedule<T>,
        current_state: usize,
        last_event: Option<usize>,
        grid_clock_h: T,
        disturbances: Vec<Disturbance<T>>,
    ) -> Result<Self, PlanError> {
        if current_state > model.max_state() {
            return Err(PlanError::Spec(SpecError::new(
                "current_state",
                format!("state q{current_state} exceeds q{}", model.max_state()),
            )));
        }
        let tol = T::tol();
        for d in &disturbances {
            if !d.at_h.is_finite() || d.at_h < model.start_time_h() - tol {
                return Err(PlanError::InvalidUpdate {
                    at_h: d.at_h.as_f64(),
                    message: "must be a finite time at or after the order starts".into(),
                });
            }
        }
        let mut pending = disturbances;
        pending.sort_by(|a, b| {
            a.at_h
                .partial_cmp(&b.at_h)
                .expect("disturbance times are comparable")
        });
        Ok(Self {
            model,
            prices,
            current_state,
            last_event,
            grid_clock_h,
            billed_until_h: grid_clock_h,
            pending,
        })
    }

    pub fn pending(&self) -> &[Disturbance<T>] {
        &self.pending
    }

    /// Removes and returns every pending disturbance effective at or before
    /// `now`, in time order (insertion order for equal instants).
    pub fn due_disturbances(&mut self, now: T) -> Vec<Disturbance<T>> {
        let tol = T::tol();
        let mut due = Vec::new();
        self.pending.retain(|d| {
            if d.at_h <= now + tol {
                due.push(d.clone());
                false
            } else {
                true
            }
        });
        due
    }

    /// Applies one disturbance. Price updates splice the tariff at the
    /// effective instant; order updates rebuild the model while preserving
    /// the machine's state and clock. History may not change: the instant
    /// must not be earlier than billed time, and a revised order may neither
    /// drop below the parts already produced nor tighten a milestone that
    /// was already crossed.
    pub fn apply_disturbance(&mut self, d: &Disturbance<T>) -> Result<(), PlanError> {
        let tol = T::tol();
        if d.at_h < self.billed_until_h - tol {
            return Err(PlanError::RetroactiveUpdate {
                at_h: d.at_h.as_f64(),
                billed_until_h: self.billed_until_h.as_f64(),
            });
        }
        match &d.kind {
            DisturbanceKind::TariffUpdate(update) => {
                self.prices = self.prices.spliced(update, d.at_h)?;
            }
            DisturbanceKind::OrderUpdate(new_order) => {
                let old = self.model.order();
                if (new_order.start_time_h - old.start_time_h).abs() > tol {
                    return Err(PlanError::InvalidUpdate {
                        at_h: d.at_h.as_f64(),
                        message: "an order update may not move the start time".into(),
                    });
                }
                let new_max =
                    new_order.total_demand + self.model.machine().allocated_inventory;
                if new_max < self.current_state {
                    return Err(PlanError::InvalidUpdate {
                        at_h: d.at_h.as_f64(),
                        message: format!(
                            "demand reduced below the {} parts already produced",
                            self.current_state
                        ),
                    });
                }
                for m_old in &old.milestones {
                    if m_old.quantity > self.current_state {
                        continue; // not crossed yet; free to change
                    }
                    let tightened = new_order.milestones.iter().any(|m_new| {
                        m_new.quantity == m_old.quantity
                            && m_new.deadline_h < m_old.deadline_h - tol
                    });
                    if tightened {
                        return Err(PlanError::InvalidUpdate {
                            at_h: d.at_h.as_f64(),
                            message: format!(
                                "milestone at {} parts was already crossed and may not be tightened",
                                m_old.quantity
                            ),
                        });
                    }
                }
                self.model =
                    PtaModel::new(self.model.machine().clone(), new_order.clone())?;
            }
        }
        Ok(())
    }

    /// Records an executed event: the machine moved to a new part count and
    /// time (and billing) advanced to the event's end.
    pub fn execute_event(&mut self, event: usize, end_h: T) {
        self.current_state += event;
        self.last_event = Some(event);
        self.grid_clock_h = end_h;
        self.billed_until_h = end_h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pta::Milestone;

    fn case_machine() -> MachineSpec<f64> {
        MachineSpec {
            capacity: 2,
            processing_time_h: 1.0,
            setup_time_h: 0.2,
            power_map_mw: vec![0.5, 0.8, 1.0],
            inventory_capacity: 3,
            allocated_inventory: 1,
        }
    }

    fn case_order() -> OrderSpec<f64> {
        OrderSpec {
            start_time_h: 8.0,
            total_demand: 7,
            milestones: vec![
                Milestone { quantity: 2, deadline_h: 1.0 },
                Milestone { quantity: 7, deadline_h: 5.0 },
            ],
        }
    }

    fn flat(price: f64, from: f64, to: f64) -> PriceSchedule<f64> {
        PriceSchedule::flat(price, from, to).unwrap()
    }

    fn ctx() -> RuntimeContext<f64> {
        let model = init_model(case_machine(), case_order()).unwrap();
        RuntimeContext::new(model, flat(50.0, 8.0, 20.0), vec![]).unwrap()
    }

    fn tariff_update(at_h: f64, prices: PriceSchedule<f64>) -> Disturbance<f64> {
        Disturbance { at_h, kind: DisturbanceKind::TariffUpdate(prices) }
    }

    #[test]
    fn model_construction_matches_the_case_study() {
        let model = init_model(case_machine(), case_order()).unwrap();
        assert_eq!(model.demand(), 7);
        assert_eq!(model.max_state(), 8);
        assert_eq!(model.max_event(), 2);
        assert!(model.is_marked(7) && model.is_marked(8) && !model.is_marked(6));
        assert_eq!(model.constraints().len(), 2);
        assert_eq!(model.constraints()[0].applies_at, 2);
    }

    #[test]
    fn zero_surplus_gives_a_singleton_marked_set() {
        let mut machine = case_machine();
        machine.allocated_inventory = 0;
        let order = OrderSpec { start_time_h: 8.0, total_demand: 3, milestones: vec![] };
        let model = init_model(machine, order).unwrap();
        assert!(model.is_marked(3));
        assert!(!model.is_marked(2) && !model.is_marked(4));
    }

    #[test]
    fn invalid_specs_are_rejected_with_the_failing_field() {
        let mut order = case_order();
        order.milestones.reverse();
        let err = init_model(case_machine(), order).unwrap_err();
        assert_eq!(err.field, "milestones");
    }

    #[test]
    fn due_disturbances_drain_in_time_order() {
        let model = init_model(case_machine(), case_order()).unwrap();
        let d10 = tariff_update(10.0, flat(80.0, 10.0, 20.0));
        let d11 = tariff_update(11.0, flat(90.0, 11.0, 20.0));
        let mut ctx = RuntimeContext::new(
            model,
            flat(50.0, 8.0, 20.0),
            vec![d11.clone(), d10.clone()],
        )
        .unwrap();
        let due = ctx.due_disturbances(10.5);
        assert_eq!(due, vec![d10]);
        assert_eq!(ctx.pending(), std::slice::from_ref(&d11));
        assert!(ctx.due_disturbances(10.9).is_empty());
        assert_eq!(ctx.due_disturbances(11.0), vec![d11]);
        assert!(ctx.pending().is_empty());
    }

    #[test]
    fn simultaneous_disturbances_keep_insertion_order() {
        let model = init_model(case_machine(), case_order()).unwrap();
        let first = tariff_update(10.0, flat(80.0, 10.0, 20.0));
        let second = tariff_update(10.0, flat(90.0, 10.0, 20.0));
        let mut ctx = RuntimeContext::new(
            model,
            flat(50.0, 8.0, 20.0),
            vec![first.clone(), second.clone()],
        )
        .unwrap();
        assert_eq!(ctx.due_disturbances(10.0), vec![first, second]);
    }

    #[test]
    fn tariff_updates_splice_prices() {
        let mut ctx = ctx();
        ctx.apply_disturbance(&tariff_update(10.0, flat(80.0, 10.0, 20.0)))
            .unwrap();
        assert_eq!(ctx.prices.price_at(9.0).unwrap(), 50.0);
        assert_eq!(ctx.prices.price_at(10.0).unwrap(), 80.0);
    }

    #[test]
    fn disturbances_may_not_rewrite_billed_time() {
        let mut ctx = ctx();
        ctx.execute_event(2, 9.0);
        ctx.execute_event(2, 10.0);
        let err = ctx
            .apply_disturbance(&tariff_update(9.5, flat(80.0, 9.5, 20.0)))
            .unwrap_err();
        assert!(matches!(err, PlanError::RetroactiveUpdate { .. }));
        // Exactly at the billed boundary is fine.
        ctx.apply_disturbance(&tariff_update(10.0, flat(80.0, 10.0, 20.0)))
            .unwrap();
    }

    #[test]
    fn disturbances_before_the_order_start_are_rejected() {
        let model = init_model(case_machine(), case_order()).unwrap();
        let err = RuntimeContext::new(
            model,
            flat(50.0, 8.0, 20.0),
            vec![tariff_update(7.0, flat(80.0, 7.0, 20.0))],
        )
        .unwrap_err();
        assert!(matches!(err, PlanError::InvalidUpdate { .. }));
    }

    #[test]
    fn order_updates_grow_the_model_in_place() {
        let mut ctx = ctx();
        ctx.execute_event(2, 9.0);
        let mut bigger = case_order();
        bigger.total_demand = 9;
        bigger.milestones[1].quantity = 9;
        bigger.milestones[1].deadline_h = 7.0;
        ctx.apply_disturbance(&Disturbance {
            at_h: 10.0,
            kind: DisturbanceKind::OrderUpdate(bigger),
        })
        .unwrap();
        assert_eq!(ctx.model.demand(), 9);
        assert_eq!(ctx.model.max_state(), 10);
        assert_eq!(ctx.current_state, 2);
        assert_eq!(ctx.grid_clock_h, 9.0);
    }

    #[test]
    fn order_updates_may_not_contradict_history() {
        let mut ctx = ctx();
        ctx.execute_event(2, 9.0);
        ctx.execute_event(2, 10.0);

        let mut shrunk = case_order();
        shrunk.total_demand = 2;
        shrunk.milestones.truncate(1);
        let err = ctx
            .apply_disturbance(&Disturbance {
                at_h: 10.0,
                kind: DisturbanceKind::OrderUpdate(shrunk),
            })
            .unwrap_err();
        assert!(matches!(err, PlanError::InvalidUpdate { .. }));

        let mut moved = case_order();
        moved.start_time_h = 9.0;
        assert!(ctx
            .apply_disturbance(&Disturbance {
                at_h: 10.0,
                kind: DisturbanceKind::OrderUpdate(moved),
            })
            .is_err());

        // The 2-part milestone was crossed at hour 9; tightening it rewrites
        // history.
        let mut tightened = case_order();
        tightened.milestones[0].deadline_h = 0.5;
        assert!(ctx
            .apply_disturbance(&Disturbance {
                at_h: 10.0,
                kind: DisturbanceKind::OrderUpdate(tightened),
            })
            .is_err());

        // Relaxing or dropping a crossed milestone is fine.
        let mut relaxed = case_order();
        relaxed.milestones[0].deadline_h = 2.0;
        ctx.apply_disturbance(&Disturbance {
            at_h: 10.0,
            kind: DisturbanceKind::OrderUpdate(relaxed),
        })
        .unwrap();
    }

    #[test]
    fn disturbance_files_use_a_flat_tagged_layout() {
        let json = r#"{
            "disturbances": [
                {"at_h": 10.0, "kind": "tariff_update",
                 "segments": [{"start_h": 10.0, "end_h": 20.0, "price_per_mwh": 80.0}]},
                {"at_h": 11.0, "kind": "order_update",
                 "start_time_h": 8.0, "total_demand": 9, "milestones": []}
            ]
        }"#;
        let set: DisturbanceSet<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(set.disturbances.len(), 2);
        assert!(matches!(set.disturbances[0].kind, DisturbanceKind::TariffUpdate(_)));
        match &set.disturbances[1].kind {
            DisturbanceKind::OrderUpdate(order) => assert_eq!(order.total_demand, 9),
            other => panic!("unexpected kind {other:?}"),
        }
        let round = serde_json::to_string(&set).unwrap();
        let back: DisturbanceSet<f64> = serde_json::from_str(&round).unwrap();
        assert_eq!(back, set);
    }
}
