//! Time-of-use electricity tariffs and exact energy-cost integration.
//!
//! A tariff is a piecewise-constant price over contiguous half-open time
//! segments `[start, end)`. Costs of running a constant electrical load over
//! an interval are computed in closed form by splitting the interval at
//! segment boundaries — no numerical quadrature anywhere in the production
//! path. Prices can be replaced from a given instant onward by splicing in
//! an updated schedule; past time is never re-priced.

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pta::{PtaError, PtaModel, ScheduleString};
use crate::scalar::Scalar;

/// Validation and evaluation errors for price schedules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TariffError {
    #[error("price schedule has no segments")]
    Empty,
    #[error("price segment {index}: {message}")]
    InvalidSegment { index: usize, message: String },
    #[error("price schedule has a gap before segment {index}")]
    Gap { index: usize },
    #[error("time {at_h}h is outside tariff coverage [{start_h}h, {end_h}h)")]
    OutOfCoverage { at_h: f64, start_h: f64, end_h: f64 },
    #[error("cannot integrate over [{start_h}h, {end_h}h]: interval must have positive length")]
    NonpositiveInterval { start_h: f64, end_h: f64 },
    #[error("price update does not cover the splice time {at_h}h")]
    GapAtSplice { at_h: f64 },
    #[error(transparent)]
    Pta(#[from] PtaError),
}

/// One tariff segment: a constant price on the half-open interval
/// `[start_h, end_h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PriceSegment<T: Scalar> {
    pub start_h: T,
    pub end_h: T,
    pub price_per_mwh: T,
}

/// A validated time-of-use tariff: sorted, contiguous, non-negative price
/// segments. Values are immutable; every operation returning a schedule
/// builds a new one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct PriceSchedule<T: Scalar> {
    segments: Vec<PriceSegment<T>>,
}

impl<T: Scalar> PriceSchedule<T> {
    /// Validates and normalises raw segments. Segments must be sorted and
    /// contiguous within tolerance; seams are snapped exactly onto the
    /// previous segment's end so lookups never fall into a micro-gap.
    pub fn new(segments: Vec<PriceSegment<T>>) -> Result<Self, TariffError> {
        if segments.is_empty() {
            return Err(TariffError::Empty);
        }
        let tol = T::tol();
        let mut normalised = Vec::with_capacity(segments.len());
        for (index, mut seg) in segments.into_iter().enumerate() {
            if !(seg.start_h.is_finite() && seg.end_h.is_finite()) {
                return Err(TariffError::InvalidSegment {
                    index,
                    message: "bounds must be finite".into(),
                });
            }
            if !(seg.price_per_mwh.is_finite() && seg.price_per_mwh >= T::zero()) {
                return Err(TariffError::InvalidSegment {
                    index,
                    message: "price must be non-negative and finite".into(),
                });
            }
            if let Some(prev) = normalised.last().map(|p: &PriceSegment<T>| p.end_h) {
                if seg.start_h > prev + tol {
                    return Err(TariffError::Gap { index });
                }
                if seg.start_h < prev - tol {
                    return Err(TariffError::InvalidSegment {
                        index,
                        message: "overlaps the previous segment".into(),
                    });
                }
                seg.start_h = prev;
            }
            if seg.end_h <= seg.start_h {
                return Err(TariffError::InvalidSegment {
                    index,
                    message: "must end after it starts".into(),
                });
            }
            normalised.push(seg);
        }
        Ok(Self { segments: normalised })
    }

    /// A single-price tariff covering `[start_h, end_h)`.
    pub fn flat(price_per_mwh: T, start_h: T, end_h: T) -> Result<Self, TariffError> {
        Self::new(vec![PriceSegment { start_h, end_h, price_per_mwh }])
    }

    pub fn segments(&self) -> &[PriceSegment<T>] {
        &self.segments
    }

    /// First instant the tariff covers.
    pub fn coverage_start_h(&self) -> T {
        self.segments[0].start_h
    }

    /// First instant past the covered range.
    pub fn coverage_end_h(&self) -> T {
        self.segments[self.segments.len() - 1].end_h
    }

    fn out_of_coverage(&self, at_h: T) -> TariffError {
        TariffError::OutOfCoverage {
            at_h: at_h.as_f64(),
            start_h: self.coverage_start_h().as_f64(),
            end_h: self.coverage_end_h().as_f64(),
        }
    }

    /// Price in force at instant `t`: the unique segment with
    /// `start ≤ t < end`. Boundaries belong to the later segment.
    pub fn price_at(&self, t: T) -> Result<T, TariffError> {
        self.segments
            .iter()
            .find(|seg| seg.start_h <= t && t < seg.end_h)
            .map(|seg| seg.price_per_mwh)
            .ok_or_else(|| self.out_of_coverage(t))
    }

    /// Exact cost of drawing a constant `power_mw` over `[start_h, end_h)`:
    /// the integral of power times price, split at segment boundaries.
    pub fn transition_energy_cost(
        &self,
        power_mw: T,
        start_h: T,
        end_h: T,
    ) -> Result<T, TariffError> {
        // Negated on purpose: a NaN endpoint must land in the error arm.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(end_h > start_h) {
            return Err(TariffError::NonpositiveInterval {
                start_h: start_h.as_f64(),
                end_h: end_h.as_f64(),
            });
        }
        let tol = T::tol();
        if start_h < self.coverage_start_h() - tol {
            return Err(self.out_of_coverage(start_h));
        }
        if end_h > self.coverage_end_h() + tol {
            return Err(self.out_of_coverage(end_h));
        }
        let mut cost = T::zero();
        for seg in &self.segments {
            let lo = if start_h > seg.start_h { start_h } else { seg.start_h };
            let hi = if end_h < seg.end_h { end_h } else { seg.end_h };
            if hi > lo {
                cost = cost + power_mw * seg.price_per_mwh * (hi - lo);
            }
        }
        Ok(cost)
    }

    /// Replaces prices with `update` from instant `at_h` onward. The result
    /// equals `self` strictly before `at_h` and `update` from `at_h` on;
    /// past time keeps its original prices.
    pub fn spliced(&self, update: &PriceSchedule<T>, at_h: T) -> Result<Self, TariffError> {
        let tol = T::tol();
        if update.coverage_start_h() > at_h + tol || update.coverage_end_h() <= at_h + tol {
            return Err(TariffError::GapAtSplice { at_h: at_h.as_f64() });
        }
        if at_h > self.coverage_end_h() + tol {
            // The retained part of the current schedule would end before the
            // update takes over.
            return Err(TariffError::GapAtSplice { at_h: at_h.as_f64() });
        }
        let mut segments: Vec<PriceSegment<T>> = Vec::new();
        for seg in &self.segments {
            let end = if seg.end_h < at_h { seg.end_h } else { at_h };
            if end - seg.start_h > tol {
                segments.push(PriceSegment { start_h: seg.start_h, end_h: end, ..*seg });
            }
        }
        for seg in &update.segments {
            let start = if seg.start_h > at_h { seg.start_h } else { at_h };
            if seg.end_h - start > tol {
                segments.push(PriceSegment { start_h: start, end_h: seg.end_h, ..*seg });
            }
        }
        // Merge seams between equal prices so splicing a schedule into
        // itself returns it unchanged.
        let mut merged: Vec<PriceSegment<T>> = Vec::with_capacity(segments.len());
        for seg in segments {
            match merged.last_mut() {
                Some(prev)
                    if prev.price_per_mwh == seg.price_per_mwh
                        && (seg.start_h - prev.end_h).abs() <= tol =>
                {
                    prev.end_h = seg.end_h;
                }
                _ => merged.push(seg),
            }
        }
        Self::new(merged)
    }

    /// Content digest (SHA-256 over the canonical JSON form), used to check
    /// that two runs priced against the same tariff.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("price schedule serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex::encode(hasher.finalize())
    }
}

impl<'de, T: Scalar> Deserialize<'de> for PriceSchedule<T> {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(bound = "")]
        struct Raw<T: Scalar> {
            segments: Vec<PriceSegment<T>>,
        }
        let raw = Raw::<T>::deserialize(deserializer)?;
        PriceSchedule::new(raw.segments).map_err(serde::de::Error::custom)
    }
}

/// Per-event energy costs of a schedule string, plus their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnergyCostBreakdown<T: Scalar> {
    /// `(event_index, cost)` pairs in execution order.
    pub per_event: Vec<(usize, T)>,
    pub total: T,
}

/// Prices a whole schedule string: each event is integrated over its timing
/// at the power its batch size draws, and the per-event costs are summed in
/// execution order.
pub fn string_energy_cost<T: Scalar>(
    model: &PtaModel<T>,
    prices: &PriceSchedule<T>,
    from_state: usize,
    start_h: T,
    s: &ScheduleString,
) -> Result<EnergyCostBreakdown<T>, TariffError> {
    let timings = model.transition_timings(from_state, start_h, s)?;
    let mut per_event = Vec::with_capacity(timings.len());
    let mut total = T::zero();
    for (event, timing) in s.iter().zip(&timings) {
        let power = model.power_mw(event)?;
        let cost = prices.transition_energy_cost(power, timing.start_h, timing.end_h)?;
        per_event.push((timing.event_index, cost));
        total = total + cost;
    }
    Ok(EnergyCostBreakdown { per_event, total })
}
