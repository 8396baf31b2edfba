//! Seeded generator of LOBF streams with known arrival and cancellation
//! behavior.
//!
//! The generator keeps its own mirror of the book and logs every event it
//! emits, so the tallies in [`GroundTruth`] are what a correct
//! feed -> book -> rates pipeline must measure.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{BookEvent, BookEventKind};
use crate::dist::{tick_curve, DistError, ModelFamily, TickCurve};
use crate::feed::{encode_stream, frame_session, FeedError, LobfFrame, MarketMessage, Side};
use crate::rates::{
    assign_bucket, session_id, trading_slot, BucketKey, BucketTallies, Diagnostics, Granularity,
    RatesError, TallyStore, ARRIVAL_TICKS, CANCEL_TICKS, SLOT_START_HOURS,
};

const NS_PER_HOUR: u64 = 3_600_000_000_000;
const SEED_HOUR: u64 = 9;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("days must be at least 1")]
    NoDays,
    #[error("invalid arrival model: {0}")]
    InvalidModel(#[from] DistError),
    #[error("invalid quantity range {min}..={max}")]
    InvalidQuantityRange { min: u32, max: u32 },
    #[error("invalid price grid: {0}")]
    InvalidPriceGrid(String),
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Rates(#[from] RatesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CancelFractionModel {
    /// Every cancel removes the whole order.
    Full,
    /// Cancelled quantity is uniform on 1..=remaining.
    UniformFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Weekdays without a session.
    pub holidays: Vec<NaiveDate>,
    pub days: u16,
    /// Limit orders per side per trading day.
    pub orders_per_day: u32,
    pub buy_model: ModelFamily,
    pub sell_model: ModelFamily,
    /// Chance that a resting order within the first 10 ticks is cancelled
    /// at each hourly sweep.
    pub cancel_probability: f64,
    pub cancel_fraction: CancelFractionModel,
    /// Chance that a tick-1 order improves the best price when the spread
    /// is at least two ticks.
    pub improve_probability: f64,
    pub tick_size: u32,
    pub initial_mid: u32,
    pub min_quantity: u32,
    pub max_quantity: u32,
    pub max_messages_per_frame: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let d = |m, d| NaiveDate::from_ymd_opt(2017, m, d).expect("valid date");
        let model = ModelFamily::DiscreteWeibull { q: 0.8, beta: 1.2 };
        Self {
            seed: 0,
            start_date: d(8, 1),
            holidays: vec![d(8, 30), d(8, 31), d(9, 1), d(9, 4)],
            days: 40,
            orders_per_day: 2_000,
            buy_model: model,
            sell_model: model,
            cancel_probability: 0.05,
            cancel_fraction: CancelFractionModel::UniformFraction,
            improve_probability: 0.1,
            tick_size: 1,
            initial_mid: 100_000,
            min_quantity: 1,
            max_quantity: 100,
            max_messages_per_frame: 1_000,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        for (name, value) in [
            ("cancel_probability", self.cancel_probability),
            ("improve_probability", self.improve_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SpecError::InvalidProbability { name, value });
            }
        }
        if self.days == 0 {
            return Err(SpecError::NoDays);
        }
        tick_curve(&self.buy_model)?;
        tick_curve(&self.sell_model)?;
        if self.min_quantity == 0 || self.min_quantity > self.max_quantity {
            return Err(SpecError::InvalidQuantityRange {
                min: self.min_quantity,
                max: self.max_quantity,
            });
        }
        if self.tick_size == 0 {
            return Err(SpecError::InvalidPriceGrid(
                "tick size must be positive".into(),
            ));
        }
        let margin = u64::from(self.tick_size) * 1_000;
        let mid = u64::from(self.initial_mid);
        if mid < margin || mid + margin > u64::from(u32::MAX) {
            return Err(SpecError::InvalidPriceGrid(format!(
                "initial mid {} leaves less than 1000 ticks of room",
                self.initial_mid
            )));
        }
        Ok(())
    }

    /// Session dates: weekdays from `start_date` that are not holidays.
    pub fn trading_days(&self) -> Vec<NaiveDate> {
        self.start_date
            .iter_days()
            .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
            .filter(|d| !self.holidays.contains(d))
            .take(usize::from(self.days))
            .collect()
    }
}

/// Tallies of one (bucket, side) as generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthBucket {
    pub bucket_key: String,
    pub side: Side,
    pub arrivals: [u64; ARRIVAL_TICKS],
    pub cancel_counts: [u64; CANCEL_TICKS],
    pub cancel_ratio_sums: [f64; CANCEL_TICKS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub sessions: u32,
    pub messages: u64,
    pub diagnostics: Diagnostics,
    pub buckets: Vec<TruthBucket>,
}

impl GroundTruth {
    /// Tallies keyed like a [`TallyStore`].
    pub fn tallies(&self) -> Result<BTreeMap<BucketKey, BucketTallies>, RatesError> {
        self.buckets
            .iter()
            .map(|b| {
                let key = BucketKey {
                    bucket: b.bucket_key.parse()?,
                    side: b.side,
                };
                let mut t = BucketTallies::default();
                t.arrivals.quantity = b.arrivals;
                t.cancels.count = b.cancel_counts;
                t.cancels.ratio_sum = b.cancel_ratio_sums;
                Ok((key, t))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub frames: Vec<LobfFrame>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy)]
struct Resting {
    side: Side,
    price: u32,
    remaining: u64,
}

/// The generator's own view of the book.
#[derive(Default)]
struct Mirror {
    bids: BTreeMap<u32, u64>,
    asks: BTreeMap<u32, u64>,
    orders: BTreeMap<u64, Resting>,
    live: [usize; 2],
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Buy => 0,
        Side::Sell => 1,
    }
}

impl Mirror {
    fn ladder(&mut self, side: Side) -> &mut BTreeMap<u32, u64> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn best(&self, side: Side) -> Option<u32> {
        match side {
            Side::Buy => self.bids.keys().next_back().copied(),
            Side::Sell => self.asks.keys().next().copied(),
        }
    }

    /// Same-side tick distance; better-than-best prices count as tick 1.
    fn tick(&self, side: Side, price: u32, tick_size: u32) -> u16 {
        let Some(best) = self.best(side) else {
            return 1;
        };
        let behind = match side {
            Side::Buy => i64::from(best) - i64::from(price),
            Side::Sell => i64::from(price) - i64::from(best),
        };
        if behind <= 0 {
            1
        } else {
            (behind / i64::from(tick_size) + 1).min(i64::from(u16::MAX)) as u16
        }
    }

    fn add(&mut self, id: u64, side: Side, price: u32, quantity: u64, tick_size: u32) -> u16 {
        let tick = self.tick(side, price, tick_size);
        *self.ladder(side).entry(price).or_insert(0) += quantity;
        self.orders.insert(
            id,
            Resting {
                side,
                price,
                remaining: quantity,
            },
        );
        self.live[side_index(side)] += 1;
        tick
    }

    /// Returns (tick, level quantity before).
    fn cancel(&mut self, id: u64, quantity: u64, tick_size: u32) -> (u16, u64) {
        let order = self.orders[&id];
        let tick = self.tick(order.side, order.price, tick_size);
        let ladder = self.ladder(order.side);
        let level = ladder
            .get_mut(&order.price)
            .expect("resting order has a level");
        let before = *level;
        *level -= quantity;
        if *level == 0 {
            ladder.remove(&order.price);
        }
        if quantity == order.remaining {
            self.orders.remove(&id);
            self.live[side_index(order.side)] -= 1;
        } else if let Some(o) = self.orders.get_mut(&id) {
            o.remaining -= quantity;
        }
        (tick, before)
    }
}

enum Slot {
    Arrival(Side),
    Sweep,
}

struct Day<'a> {
    spec: &'a SynthSpec,
    curves: [TickCurve; 2],
    mirror: Mirror,
    next_id: u64,
    messages: Vec<MarketMessage>,
    events: Vec<BookEvent>,
}

impl Day<'_> {
    fn quantity(&self, rng: &mut ChaCha8Rng) -> u32 {
        rng.random_range(self.spec.min_quantity..=self.spec.max_quantity)
    }

    fn add(&mut self, ts: u64, side: Side, price: u32, quantity: u32) {
        let id = self.next_id;
        self.next_id += 1;
        let tick = self
            .mirror
            .add(id, side, price, quantity.into(), self.spec.tick_size);
        self.messages.push(MarketMessage::Add {
            timestamp_ns: ts,
            order_id: id,
            side,
            price,
            quantity,
        });
        self.events.push(BookEvent {
            kind: BookEventKind::LimitArrival,
            side,
            timestamp_ns: ts,
            tick,
            quantity: quantity.into(),
            via_replace: false,
        });
    }

    /// Fifteen one-order levels per side, before the open.
    fn seed_book(&mut self, rng: &mut ChaCha8Rng) {
        let ts0 = SEED_HOUR * NS_PER_HOUR;
        let step = self.spec.tick_size;
        for k in 0..ARRIVAL_TICKS as u32 {
            for side in Side::BOTH {
                let offset = (k + 1) * step;
                let price = match side {
                    Side::Buy => self.spec.initial_mid - offset,
                    Side::Sell => self.spec.initial_mid + offset,
                };
                let q = self.quantity(rng);
                let ts = ts0 + self.messages.len() as u64;
                self.add(ts, side, price, q);
            }
        }
    }

    fn arrive(&mut self, ts: u64, side: Side, rng: &mut ChaCha8Rng) {
        let step = self.spec.tick_size;
        let best = self.mirror.best(side).expect("sides are never emptied");
        let tick = u32::from(self.curves[side_index(side)].sample_tick(rng));
        let other = self
            .mirror
            .best(side.opposite())
            .expect("sides are never emptied");
        let spread_ticks = other.abs_diff(best) / step;
        let price =
            if tick == 1 && spread_ticks >= 2 && rng.random_bool(self.spec.improve_probability) {
                match side {
                    Side::Buy => best + step,
                    Side::Sell => best - step,
                }
            } else {
                let behind = (tick - 1) * step;
                match side {
                    Side::Buy => best.saturating_sub(behind).max(step),
                    Side::Sell => best.saturating_add(behind),
                }
            };
        let q = self.quantity(rng);
        self.add(ts, side, price, q);
    }

    /// Each resting order within the first 10 ticks is cancelled with the
    /// configured probability; the last order on a side always survives.
    fn sweep(&mut self, ts: u64, rng: &mut ChaCha8Rng) {
        let step = self.spec.tick_size;
        for side in Side::BOTH {
            let eligible: Vec<u64> = self
                .mirror
                .orders
                .iter()
                .filter(|(_, o)| {
                    o.side == side
                        && usize::from(self.mirror.tick(side, o.price, step)) <= CANCEL_TICKS
                })
                .map(|(&id, _)| id)
                .collect();
            for id in eligible {
                if !rng.random_bool(self.spec.cancel_probability)
                    || self.mirror.live[side_index(side)] <= 1
                {
                    continue;
                }
                let remaining = self.mirror.orders[&id].remaining;
                let quantity = match self.spec.cancel_fraction {
                    CancelFractionModel::Full => remaining,
                    CancelFractionModel::UniformFraction => rng.random_range(1..=remaining),
                };
                let (tick, before) = self.mirror.cancel(id, quantity, step);
                self.messages.push(if quantity == remaining {
                    MarketMessage::Delete {
                        timestamp_ns: ts,
                        order_id: id,
                    }
                } else {
                    MarketMessage::Cancel {
                        timestamp_ns: ts,
                        order_id: id,
                        quantity: quantity as u32,
                    }
                });
                self.events.push(BookEvent {
                    kind: BookEventKind::Cancel {
                        level_quantity_before: before,
                    },
                    side,
                    timestamp_ns: ts,
                    tick,
                    quantity,
                    via_replace: false,
                });
            }
        }
    }
}

fn trading_time(rng: &mut ChaCha8Rng) -> u64 {
    let hour = SLOT_START_HOURS[rng.random_range(0..SLOT_START_HOURS.len())];
    hour * NS_PER_HOUR + rng.random_range(0..NS_PER_HOUR)
}

/// Generates the stream as frames together with its ground truth.
///
/// Deterministic for a given spec.
pub fn generate_frames(spec: &SynthSpec) -> Result<SynthOutput, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let curves = [tick_curve(&spec.buy_model)?, tick_curve(&spec.sell_model)?];
    let mut store = TallyStore::new(true);
    let mut frames = Vec::new();
    let mut messages = 0u64;
    let days = spec.trading_days();
    for &date in &days {
        let mut day = Day {
            spec,
            curves,
            mirror: Mirror::default(),
            next_id: 1,
            messages: Vec::new(),
            events: Vec::new(),
        };
        day.seed_book(&mut rng);

        let mut schedule: Vec<(u64, Slot)> = Vec::new();
        for side in Side::BOTH {
            for _ in 0..spec.orders_per_day {
                schedule.push((trading_time(&mut rng), Slot::Arrival(side)));
            }
        }
        for &hour in &SLOT_START_HOURS {
            let ts = hour * NS_PER_HOUR + rng.random_range(0..NS_PER_HOUR);
            schedule.push((ts, Slot::Sweep));
        }
        schedule.sort_by_key(|(ts, _)| *ts);
        for (ts, slot) in schedule {
            match slot {
                Slot::Arrival(side) => day.arrive(ts, side, &mut rng),
                Slot::Sweep => day.sweep(ts, &mut rng),
            }
        }

        for event in &day.events {
            if trading_slot(event.timestamp_ns).is_err() {
                store.diagnostics.outside_hours += 1;
                continue;
            }
            for g in Granularity::ALL {
                store.accumulate(event, assign_bucket(event.timestamp_ns, date, g)?);
            }
        }
        messages += day.messages.len() as u64;
        frames.extend(frame_session(
            session_id(date),
            1,
            &day.messages,
            spec.max_messages_per_frame,
        ));
    }

    let buckets = store
        .iter()
        .map(|(key, t)| TruthBucket {
            bucket_key: key.bucket.to_string(),
            side: key.side,
            arrivals: t.arrivals.quantity,
            cancel_counts: t.cancels.count,
            cancel_ratio_sums: t.cancels.ratio_sum,
        })
        .collect();
    Ok(SynthOutput {
        frames,
        truth: GroundTruth {
            spec: spec.clone(),
            sessions: days.len() as u32,
            messages,
            diagnostics: store.diagnostics,
            buckets,
        },
    })
}

/// Generates the encoded LOBF byte stream and its ground truth.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<u8>, GroundTruth), SpecError> {
    let out = generate_frames(spec)?;
    Ok((encode_stream(&out.frames)?, out.truth))
}
