//! Order book reconstruction from a LOBF message stream.
//!
//! Every applied message yields [`BookEvent`]s tagged with the tick distance
//! of the affected price at the moment the message arrived.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feed::{MarketMessage, Side};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("unknown order id {0}")]
    UnknownOrderId(u64),
    #[error("duplicate order id {0}")]
    DuplicateOrderId(u64),
    #[error("order {order_id}: cancel of {requested} exceeds remaining {remaining}")]
    OverCancel {
        order_id: u64,
        requested: u64,
        remaining: u64,
    },
    #[error("order {order_id}: execution of {requested} exceeds remaining {remaining}")]
    OverExecution {
        order_id: u64,
        requested: u64,
        remaining: u64,
    },
    #[error("no best price on the {0} side")]
    MissingReference(Side),
    #[error("invalid message: {0}")]
    InvalidMessage(#[from] crate::feed::FeedError),
}

/// Which best price a tick distance is measured from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TickReference {
    /// Buys from the best bid, sells from the best ask; the touch is tick 1.
    #[default]
    SameSide,
    /// Buys from the best ask, sells from the best bid.
    OppositeSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceLevel {
    pub price: u32,
    pub total_quantity: u64,
    pub order_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestingOrder {
    pub side: Side,
    pub price: u32,
    pub remaining: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BookEventKind {
    LimitArrival,
    /// `level_quantity_before` is the level total just before the cancel.
    Cancel {
        level_quantity_before: u64,
    },
    Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookEvent {
    pub kind: BookEventKind,
    pub side: Side,
    pub timestamp_ns: u64,
    pub tick: u16,
    pub quantity: u64,
    /// Set when the event is half of a Replace message.
    pub via_replace: bool,
}

impl BookEvent {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            BookEventKind::LimitArrival => "limit_arrival",
            BookEventKind::Cancel { .. } => "cancel",
            BookEventKind::Execution => "execution",
        }
    }

    pub fn level_quantity_before(&self) -> Option<u64> {
        match self.kind {
            BookEventKind::Cancel {
                level_quantity_before,
            } => Some(level_quantity_before),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBook {
    bids: BTreeMap<u32, PriceLevel>,
    asks: BTreeMap<u32, PriceLevel>,
    orders: HashMap<u64, RestingOrder>,
    tick_size: u32,
    reference: TickReference,
}

impl Default for OrderBook {
    fn default() -> Self {
        Self::new(1, TickReference::SameSide)
    }
}

impl OrderBook {
    pub fn new(tick_size: u32, reference: TickReference) -> Self {
        assert!(tick_size > 0, "tick size must be positive");
        Self {
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            orders: HashMap::new(),
            tick_size,
            reference,
        }
    }

    pub fn tick_size(&self) -> u32 {
        self.tick_size
    }

    pub fn reference(&self) -> TickReference {
        self.reference
    }

    pub fn best_bid(&self) -> Option<u32> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<u32> {
        self.asks.keys().next().copied()
    }

    pub fn best_prices(&self) -> (Option<u32>, Option<u32>) {
        (self.best_bid(), self.best_ask())
    }

    pub fn order(&self, order_id: u64) -> Option<&RestingOrder> {
        self.orders.get(&order_id)
    }

    pub fn order_count(&self) -> usize {
        self.orders.len()
    }

    pub fn level(&self, side: Side, price: u32) -> Option<&PriceLevel> {
        self.ladder(side).get(&price)
    }

    /// Bids in descending price order.
    pub fn bid_levels(&self) -> impl Iterator<Item = &PriceLevel> {
        self.bids.values().rev()
    }

    /// Asks in ascending price order.
    pub fn ask_levels(&self) -> impl Iterator<Item = &PriceLevel> {
        self.asks.values()
    }

    pub fn orders(&self) -> impl Iterator<Item = (&u64, &RestingOrder)> {
        self.orders.iter()
    }

    fn ladder(&self, side: Side) -> &BTreeMap<u32, PriceLevel> {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn ladder_mut(&mut self, side: Side) -> &mut BTreeMap<u32, PriceLevel> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    /// 1-based distance of `price` from the reference best price.
    ///
    /// Prices more aggressive than the reference clamp to tick 1.
    pub fn tick_distance(
        &self,
        side: Side,
        price: u32,
        reference: TickReference,
    ) -> Result<u16, BookError> {
        let price = i64::from(price);
        let tick = i64::from(self.tick_size);
        let raw = match (reference, side) {
            (TickReference::SameSide, Side::Buy) => {
                let best = self
                    .best_bid()
                    .ok_or(BookError::MissingReference(Side::Buy))?;
                (i64::from(best) - price).div_euclid(tick) + 1
            }
            (TickReference::SameSide, Side::Sell) => {
                let best = self
                    .best_ask()
                    .ok_or(BookError::MissingReference(Side::Sell))?;
                (price - i64::from(best)).div_euclid(tick) + 1
            }
            (TickReference::OppositeSide, Side::Buy) => {
                let best = self
                    .best_ask()
                    .ok_or(BookError::MissingReference(Side::Sell))?;
                (i64::from(best) - price).div_euclid(tick)
            }
            (TickReference::OppositeSide, Side::Sell) => {
                let best = self
                    .best_bid()
                    .ok_or(BookError::MissingReference(Side::Buy))?;
                (price - i64::from(best)).div_euclid(tick)
            }
        };
        Ok(raw.clamp(1, i64::from(u16::MAX)) as u16)
    }

    /// Tick for an event; an empty reference side seeds at tick 1.
    fn event_tick(&self, side: Side, price: u32) -> u16 {
        self.tick_distance(side, price, self.reference).unwrap_or(1)
    }

    fn insert(&mut self, order_id: u64, side: Side, price: u32, quantity: u64) {
        let level = self.ladder_mut(side).entry(price).or_insert(PriceLevel {
            price,
            total_quantity: 0,
            order_count: 0,
        });
        level.total_quantity += quantity;
        level.order_count += 1;
        self.orders.insert(
            order_id,
            RestingOrder {
                side,
                price,
                remaining: quantity,
            },
        );
    }

    /// Removes `quantity` from a resting order; returns the level total before.
    fn reduce(&mut self, order_id: u64, quantity: u64) -> u64 {
        let order = self.orders.get_mut(&order_id).expect("checked by caller");
        let (side, price) = (order.side, order.price);
        order.remaining -= quantity;
        let filled = order.remaining == 0;
        if filled {
            self.orders.remove(&order_id);
        }
        let ladder = self.ladder_mut(side);
        let level = ladder
            .get_mut(&price)
            .expect("index consistent with ladder");
        let before = level.total_quantity;
        level.total_quantity -= quantity;
        if filled {
            level.order_count -= 1;
        }
        if level.total_quantity == 0 {
            ladder.remove(&price);
        }
        before
    }

    fn lookup(&self, order_id: u64) -> Result<RestingOrder, BookError> {
        self.orders
            .get(&order_id)
            .copied()
            .ok_or(BookError::UnknownOrderId(order_id))
    }

    /// Applies one message. On error the book is left unchanged.
    pub fn apply(&mut self, msg: &MarketMessage) -> Result<Vec<BookEvent>, BookError> {
        msg.validate()?;
        match *msg {
            MarketMessage::Add {
                timestamp_ns,
                order_id,
                side,
                price,
                quantity,
            } => {
                if self.orders.contains_key(&order_id) {
                    return Err(BookError::DuplicateOrderId(order_id));
                }
                Ok(vec![self.add(
                    timestamp_ns,
                    order_id,
                    side,
                    price,
                    quantity.into(),
                    false,
                )])
            }
            MarketMessage::Cancel {
                timestamp_ns,
                order_id,
                quantity,
            } => {
                let order = self.lookup(order_id)?;
                let quantity = u64::from(quantity);
                if quantity > order.remaining {
                    return Err(BookError::OverCancel {
                        order_id,
                        requested: quantity,
                        remaining: order.remaining,
                    });
                }
                Ok(vec![self.cancel(
                    timestamp_ns,
                    order_id,
                    order,
                    quantity,
                    false,
                )])
            }
            MarketMessage::Delete {
                timestamp_ns,
                order_id,
            } => {
                let order = self.lookup(order_id)?;
                Ok(vec![self.cancel(
                    timestamp_ns,
                    order_id,
                    order,
                    order.remaining,
                    false,
                )])
            }
            MarketMessage::Execute {
                timestamp_ns,
                order_id,
                quantity,
            } => {
                let order = self.lookup(order_id)?;
                let quantity = u64::from(quantity);
                if quantity > order.remaining {
                    return Err(BookError::OverExecution {
                        order_id,
                        requested: quantity,
                        remaining: order.remaining,
                    });
                }
                let tick = self.event_tick(order.side, order.price);
                self.reduce(order_id, quantity);
                Ok(vec![BookEvent {
                    kind: BookEventKind::Execution,
                    side: order.side,
                    timestamp_ns,
                    tick,
                    quantity,
                    via_replace: false,
                }])
            }
            MarketMessage::Replace {
                timestamp_ns,
                order_id,
                new_order_id,
                price,
                quantity,
            } => {
                let order = self.lookup(order_id)?;
                if new_order_id != order_id && self.orders.contains_key(&new_order_id) {
                    return Err(BookError::DuplicateOrderId(new_order_id));
                }
                let cancel = self.cancel(timestamp_ns, order_id, order, order.remaining, true);
                let arrival = self.add(
                    timestamp_ns,
                    new_order_id,
                    order.side,
                    price,
                    quantity.into(),
                    true,
                );
                Ok(vec![cancel, arrival])
            }
        }
    }

    fn add(
        &mut self,
        timestamp_ns: u64,
        order_id: u64,
        side: Side,
        price: u32,
        quantity: u64,
        via_replace: bool,
    ) -> BookEvent {
        let tick = self.event_tick(side, price);
        self.insert(order_id, side, price, quantity);
        BookEvent {
            kind: BookEventKind::LimitArrival,
            side,
            timestamp_ns,
            tick,
            quantity,
            via_replace,
        }
    }

    fn cancel(
        &mut self,
        timestamp_ns: u64,
        order_id: u64,
        order: RestingOrder,
        quantity: u64,
        via_replace: bool,
    ) -> BookEvent {
        let tick = self.event_tick(order.side, order.price);
        let level_quantity_before = self.reduce(order_id, quantity);
        BookEvent {
            kind: BookEventKind::Cancel {
                level_quantity_before,
            },
            side: order.side,
            timestamp_ns,
            tick,
            quantity,
            via_replace,
        }
    }

    /// Checks that ladder totals agree with the order index.
    pub fn is_consistent(&self) -> bool {
        let mut sums: HashMap<(Side, u32), (u64, u32)> = HashMap::new();
        for order in self.orders.values() {
            if order.remaining == 0 {
                return false;
            }
            let e = sums.entry((order.side, order.price)).or_default();
            e.0 += order.remaining;
            e.1 += 1;
        }
        let levels = self.bids.len() + self.asks.len();
        levels == sums.len()
            && Side::BOTH.iter().all(|&side| {
                self.ladder(side)
                    .values()
                    .all(|l| sums.get(&(side, l.price)) == Some(&(l.total_quantity, l.order_count)))
            })
    }
}

/// Writes events as CSV: `kind,side,timestamp_ns,tick,quantity,level_quantity_before`.
pub fn write_events_csv<W: Write>(events: &[BookEvent], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "kind",
        "side",
        "timestamp_ns",
        "tick",
        "quantity",
        "level_quantity_before",
    ])?;
    for e in events {
        w.write_record([
            e.kind_name().to_string(),
            e.side.to_string(),
            e.timestamp_ns.to_string(),
            e.tick.to_string(),
            e.quantity.to_string(),
            e.level_quantity_before()
                .map(|q| q.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
