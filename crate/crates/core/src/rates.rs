//! Time bucketing, arrival-rate densities and cancellation ratios.
//!
//! Sessions are trading days. A LOBF `session_id` encodes the session date
//! as `YYYYMMDD` and message timestamps count nanoseconds from local
//! midnight of that date. Trading hours are 10:00-13:00 and 14:00-18:00,
//! split into seven hourly slots.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{BookError, BookEvent, BookEventKind, OrderBook, TickReference};
use crate::feed::{FeedError, LobfFrame, Side};

pub const ARRIVAL_TICKS: usize = 15;
pub const CANCEL_TICKS: usize = 10;
pub const HOURLY_SLOTS: u8 = 7;

const NS_PER_HOUR: u64 = 3_600_000_000_000;

/// Start hour of each slot (local time); every slot lasts one hour.
pub const SLOT_START_HOURS: [u64; 7] = [10, 11, 12, 14, 15, 16, 17];

#[derive(Debug, Error)]
pub enum RatesError {
    #[error("timestamp {0} ns is outside trading hours")]
    OutsideTradingHours(u64),
    #[error("bucket has no arrived quantity")]
    EmptyBucket,
    #[error("session id {0} is not a YYYYMMDD date")]
    InvalidSessionId(u32),
    #[error("timestamp went backwards in session {session_id}: {previous} -> {current}")]
    TimestampRegression {
        session_id: u32,
        previous: u64,
        current: u64,
    },
    #[error("cannot parse bucket key {0:?}")]
    BadBucketKey(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error("session {session_id}, sequence {sequence}: {source}")]
    Book {
        session_id: u32,
        sequence: u64,
        source: BookError,
    },
}

impl From<csv::Error> for RatesError {
    fn from(e: csv::Error) -> Self {
        RatesError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Weekly,
    Monthly,
    #[serde(rename = "hourly")]
    HourlyWeekly,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Daily,
        Granularity::Weekly,
        Granularity::Monthly,
        Granularity::HourlyWeekly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Daily => "daily",
            Granularity::Weekly => "weekly",
            Granularity::Monthly => "monthly",
            Granularity::HourlyWeekly => "hourly",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Granularity::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown granularity {s:?}"))
    }
}

/// A time bucket. Weeks are ISO calendar weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Daily(NaiveDate),
    Weekly { year: i32, week: u32 },
    Monthly { year: i32, month: u32 },
    HourlyWeekly { year: i32, week: u32, slot: u8 },
}

impl Bucket {
    pub fn granularity(&self) -> Granularity {
        match self {
            Bucket::Daily(_) => Granularity::Daily,
            Bucket::Weekly { .. } => Granularity::Weekly,
            Bucket::Monthly { .. } => Granularity::Monthly,
            Bucket::HourlyWeekly { .. } => Granularity::HourlyWeekly,
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucket::Daily(d) => write!(f, "daily:{}", d.format("%Y-%m-%d")),
            Bucket::Weekly { year, week } => write!(f, "weekly:{year:04}-W{week:02}"),
            Bucket::Monthly { year, month } => write!(f, "monthly:{year:04}-{month:02}"),
            Bucket::HourlyWeekly { year, week, slot } => {
                write!(f, "hourly:{year:04}-W{week:02}-S{slot}")
            }
        }
    }
}

impl FromStr for Bucket {
    type Err = RatesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RatesError::BadBucketKey(s.to_string());
        let (gran, rest) = s.split_once(':').ok_or_else(bad)?;
        let parse_week = |w: &str| -> Result<(i32, u32), RatesError> {
            let (y, wk) = w.split_once("-W").ok_or_else(bad)?;
            let year = y.parse().map_err(|_| bad())?;
            let week: u32 = wk.parse().map_err(|_| bad())?;
            NaiveDate::from_isoywd_opt(year, week, chrono::Weekday::Mon).ok_or_else(bad)?;
            Ok((year, week))
        };
        match gran {
            "daily" => NaiveDate::parse_from_str(rest, "%Y-%m-%d")
                .map(Bucket::Daily)
                .map_err(|_| bad()),
            "weekly" => parse_week(rest).map(|(year, week)| Bucket::Weekly { year, week }),
            "monthly" => {
                let (y, m) = rest.split_once('-').ok_or_else(bad)?;
                let year = y.parse().map_err(|_| bad())?;
                let month = m.parse().map_err(|_| bad())?;
                if !(1..=12).contains(&month) {
                    return Err(bad());
                }
                Ok(Bucket::Monthly { year, month })
            }
            "hourly" => {
                let (w, slot) = rest.rsplit_once("-S").ok_or_else(bad)?;
                let (year, week) = parse_week(w)?;
                let slot: u8 = slot.parse().map_err(|_| bad())?;
                if !(1..=HOURLY_SLOTS).contains(&slot) {
                    return Err(bad());
                }
                Ok(Bucket::HourlyWeekly { year, week, slot })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BucketKey {
    pub bucket: Bucket,
    pub side: Side,
}

pub fn session_date(session_id: u32) -> Result<NaiveDate, RatesError> {
    let year = (session_id / 10_000) as i32;
    let month = (session_id / 100) % 100;
    let day = session_id % 100;
    NaiveDate::from_ymd_opt(year, month, day).ok_or(RatesError::InvalidSessionId(session_id))
}

pub fn session_id(date: NaiveDate) -> u32 {
    date.year() as u32 * 10_000 + date.month() * 100 + date.day()
}

/// Hourly slot 1..=7 for a time of day, or `OutsideTradingHours`.
pub fn trading_slot(timestamp_ns: u64) -> Result<u8, RatesError> {
    let hour = timestamp_ns / NS_PER_HOUR;
    SLOT_START_HOURS
        .iter()
        .position(|&h| h == hour)
        .map(|i| i as u8 + 1)
        .ok_or(RatesError::OutsideTradingHours(timestamp_ns))
}

pub fn assign_bucket(
    timestamp_ns: u64,
    session_date: NaiveDate,
    granularity: Granularity,
) -> Result<Bucket, RatesError> {
    let slot = trading_slot(timestamp_ns)?;
    let iso = session_date.iso_week();
    Ok(match granularity {
        Granularity::Daily => Bucket::Daily(session_date),
        Granularity::Weekly => Bucket::Weekly {
            year: iso.year(),
            week: iso.week(),
        },
        Granularity::Monthly => Bucket::Monthly {
            year: session_date.year(),
            month: session_date.month(),
        },
        Granularity::HourlyWeekly => Bucket::HourlyWeekly {
            year: iso.year(),
            week: iso.week(),
            slot,
        },
    })
}

/// Quantity arrived per tick; index 0 is tick 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalTally {
    pub quantity: [u64; ARRIVAL_TICKS],
}

impl ArrivalTally {
    pub fn total(&self) -> u64 {
        self.quantity.iter().sum()
    }

    pub fn merge(&mut self, other: &ArrivalTally) {
        for (a, b) in self.quantity.iter_mut().zip(other.quantity) {
            *a += b;
        }
    }
}

/// Per-tick sums of cancel ratios and cancel counts; index 0 is tick 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CancelTally {
    pub ratio_sum: [f64; CANCEL_TICKS],
    pub count: [u64; CANCEL_TICKS],
}

impl CancelTally {
    pub fn total_count(&self) -> u64 {
        self.count.iter().sum()
    }

    pub fn merge(&mut self, other: &CancelTally) {
        for i in 0..CANCEL_TICKS {
            self.ratio_sum[i] += other.ratio_sum[i];
            self.count[i] += other.count[i];
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketTallies {
    pub arrivals: ArrivalTally,
    pub cancels: CancelTally,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dropped_arrivals: u64,
    pub dropped_cancels: u64,
    pub outside_hours: u64,
    pub excluded_replaces: u64,
    pub executions: u64,
}

impl Diagnostics {
    fn merge(&mut self, o: &Diagnostics) {
        self.dropped_arrivals += o.dropped_arrivals;
        self.dropped_cancels += o.dropped_cancels;
        self.outside_hours += o.outside_hours;
        self.excluded_replaces += o.excluded_replaces;
        self.executions += o.executions;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TallyStore {
    buckets: BTreeMap<BucketKey, BucketTallies>,
    pub diagnostics: Diagnostics,
    include_replaces: bool,
}

impl Default for TallyStore {
    fn default() -> Self {
        Self::new(true)
    }
}

impl TallyStore {
    pub fn new(include_replaces: bool) -> Self {
        Self {
            buckets: BTreeMap::new(),
            diagnostics: Diagnostics::default(),
            include_replaces,
        }
    }

    pub fn get(&self, key: &BucketKey) -> Option<&BucketTallies> {
        self.buckets.get(key)
    }

    /// Buckets in (bucket, side) order.
    pub fn iter(&self) -> impl Iterator<Item = (&BucketKey, &BucketTallies)> {
        self.buckets.iter()
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Adds one event to the tallies of `bucket` on the event's side.
    ///
    /// Arrivals beyond tick 15 and cancels beyond tick 10 are dropped and
    /// counted in [`Diagnostics`].
    pub fn accumulate(&mut self, event: &BookEvent, bucket: Bucket) {
        if event.via_replace && !self.include_replaces {
            self.diagnostics.excluded_replaces += 1;
            return;
        }
        let tick = event.tick as usize;
        debug_assert!(tick >= 1);
        let key = BucketKey {
            bucket,
            side: event.side,
        };
        match event.kind {
            BookEventKind::LimitArrival => {
                if tick > ARRIVAL_TICKS {
                    self.diagnostics.dropped_arrivals += 1;
                    return;
                }
                let t = self.buckets.entry(key).or_default();
                t.arrivals.quantity[tick - 1] += event.quantity;
            }
            BookEventKind::Cancel {
                level_quantity_before,
            } => {
                if tick > CANCEL_TICKS {
                    self.diagnostics.dropped_cancels += 1;
                    return;
                }
                let t = self.buckets.entry(key).or_default();
                t.cancels.ratio_sum[tick - 1] +=
                    event.quantity as f64 / level_quantity_before as f64;
                t.cancels.count[tick - 1] += 1;
            }
            BookEventKind::Execution => self.diagnostics.executions += 1,
        }
    }

    /// Entry-wise sum with another store.
    pub fn merge(&mut self, other: &TallyStore) {
        for (key, t) in &other.buckets {
            let mine = self.buckets.entry(*key).or_default();
            mine.arrivals.merge(&t.arrivals);
            mine.cancels.merge(&t.cancels);
        }
        self.diagnostics.merge(&other.diagnostics);
    }

    /// Buckets with arrived quantity, i.e. the instances that get fitted.
    pub fn instances(&self) -> impl Iterator<Item = (&BucketKey, &ArrivalTally)> {
        self.buckets
            .iter()
            .filter(|(_, t)| t.arrivals.total() > 0)
            .map(|(k, t)| (k, &t.arrivals))
    }
}

/// Fraction of arrived quantity per tick.
pub fn arrival_density(tally: &ArrivalTally) -> Result<[f64; ARRIVAL_TICKS], RatesError> {
    let total = tally.total();
    if total == 0 {
        return Err(RatesError::EmptyBucket);
    }
    let total = total as f64;
    Ok(tally.quantity.map(|q| q as f64 / total))
}

/// Mean cancel ratio per tick; `None` where no cancel arrived.
pub fn cancellation_ratio(tally: &CancelTally) -> [Option<f64>; CANCEL_TICKS] {
    std::array::from_fn(|i| {
        (tally.count[i] > 0).then(|| tally.ratio_sum[i] / tally.count[i] as f64)
    })
}

#[derive(Debug, Clone)]
pub struct ExtractConfig {
    pub granularities: Vec<Granularity>,
    pub reference: TickReference,
    pub tick_size: u32,
    pub include_replaces: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            granularities: Granularity::ALL.to_vec(),
            reference: TickReference::SameSide,
            tick_size: 1,
            include_replaces: true,
        }
    }
}

/// Replays frames through one order book per session and tallies the events.
///
/// `on_event` sees every book event (with its session id) before bucketing.
pub fn extract_tallies_with<F>(
    frames: &[LobfFrame],
    config: &ExtractConfig,
    mut on_event: F,
) -> Result<TallyStore, RatesError>
where
    F: FnMut(u32, &BookEvent),
{
    struct Session {
        date: NaiveDate,
        book: OrderBook,
        last_ts: u64,
    }

    let mut store = TallyStore::new(config.include_replaces);
    let mut sessions: HashMap<u32, Session> = HashMap::new();
    for frame in frames {
        let session = match sessions.entry(frame.session_id) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(Session {
                date: session_date(frame.session_id)?,
                book: OrderBook::new(config.tick_size, config.reference),
                last_ts: 0,
            }),
        };
        for (offset, msg) in frame.messages.iter().enumerate() {
            let ts = msg.timestamp_ns();
            if ts < session.last_ts {
                return Err(RatesError::TimestampRegression {
                    session_id: frame.session_id,
                    previous: session.last_ts,
                    current: ts,
                });
            }
            session.last_ts = ts;
            let events = session.book.apply(msg).map_err(|source| RatesError::Book {
                session_id: frame.session_id,
                sequence: frame.sequence_number + offset as u64,
                source,
            })?;
            for event in &events {
                on_event(frame.session_id, event);
                if trading_slot(event.timestamp_ns).is_err() {
                    store.diagnostics.outside_hours += 1;
                    continue;
                }
                for &g in &config.granularities {
                    let bucket = assign_bucket(event.timestamp_ns, session.date, g)?;
                    store.accumulate(event, bucket);
                }
            }
        }
    }
    Ok(store)
}

pub fn extract_tallies(
    frames: &[LobfFrame],
    config: &ExtractConfig,
) -> Result<TallyStore, RatesError> {
    extract_tallies_with(frames, config, |_, _| {})
}

/// `bucket_key,side,tick,quantity,density`, 15 rows per instance.
pub fn write_rates_csv<W: Write>(store: &TallyStore, writer: W) -> Result<(), RatesError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bucket_key", "side", "tick", "quantity", "density"])?;
    for (key, tally) in store.instances() {
        let density = arrival_density(tally)?;
        for (i, (q, d)) in tally.quantity.iter().zip(density).enumerate() {
            w.write_record([
                key.bucket.to_string(),
                key.side.to_string(),
                (i + 1).to_string(),
                q.to_string(),
                d.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| RatesError::Csv(e.to_string()))?;
    Ok(())
}

/// `bucket_key,side,tick,count,mean_ratio`, 10 rows per bucket with cancels.
/// Ticks without cancels have an empty `mean_ratio`.
pub fn write_cancels_csv<W: Write>(store: &TallyStore, writer: W) -> Result<(), RatesError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bucket_key", "side", "tick", "count", "mean_ratio"])?;
    for (key, t) in store.iter().filter(|(_, t)| t.cancels.total_count() > 0) {
        let ratios = cancellation_ratio(&t.cancels);
        for (i, (count, ratio)) in t.cancels.count.iter().zip(ratios).enumerate() {
            w.write_record([
                key.bucket.to_string(),
                key.side.to_string(),
                (i + 1).to_string(),
                count.to_string(),
                ratio.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| RatesError::Csv(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RateRow {
    bucket_key: String,
    side: String,
    tick: usize,
    quantity: u64,
}

#[derive(Debug, Deserialize)]
struct CancelRow {
    bucket_key: String,
    side: String,
    tick: usize,
    count: u64,
    mean_ratio: Option<f64>,
}

fn parse_key(bucket: &str, side: &str) -> Result<BucketKey, RatesError> {
    Ok(BucketKey {
        bucket: bucket.parse()?,
        side: side.parse().map_err(RatesError::Csv)?,
    })
}

pub fn read_rates_csv<R: Read>(reader: R) -> Result<BTreeMap<BucketKey, ArrivalTally>, RatesError> {
    let mut out: BTreeMap<BucketKey, ArrivalTally> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: RateRow = row?;
        if !(1..=ARRIVAL_TICKS).contains(&row.tick) {
            return Err(RatesError::Csv(format!("tick {} out of range", row.tick)));
        }
        let key = parse_key(&row.bucket_key, &row.side)?;
        out.entry(key).or_default().quantity[row.tick - 1] = row.quantity;
    }
    Ok(out)
}

/// Per-tick cancel counts and mean ratios as read back from a cancels CSV.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CancelSummary {
    pub count: [u64; CANCEL_TICKS],
    pub mean_ratio: [Option<f64>; CANCEL_TICKS],
}

pub fn read_cancels_csv<R: Read>(
    reader: R,
) -> Result<BTreeMap<BucketKey, CancelSummary>, RatesError> {
    let mut out: BTreeMap<BucketKey, CancelSummary> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: CancelRow = row?;
        if !(1..=CANCEL_TICKS).contains(&row.tick) {
            return Err(RatesError::Csv(format!("tick {} out of range", row.tick)));
        }
        let key = parse_key(&row.bucket_key, &row.side)?;
        let s = out.entry(key).or_default();
        s.count[row.tick - 1] = row.count;
        s.mean_ratio[row.tick - 1] = row.mean_ratio;
    }
    Ok(out)
}
