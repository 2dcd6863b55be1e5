//! Events, event streams and the `EVT1` binary container.
//!
//! Timestamps produced inside this crate lie on a dyadic clock grid
//! ([`TICK`] seconds). On that grid time reflection `t -> t_start + t_end - t`
//! is exact in binary floating point, so [`reverse_stream`] is an exact
//! involution for such streams.

use std::cmp::Ordering;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::image::BinaryImage;

/// Sensor clock resolution, 2^-32 s.
pub const TICK: f64 = 1.0 / 4_294_967_296.0;

/// Rounds a time in seconds to the nearest clock tick.
#[inline]
pub fn snap_to_tick(t: f64) -> f64 {
    (t / TICK).round() * TICK
}

/// A single brightness-change impulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Seconds.
    pub t: f64,
    pub x: u16,
    pub y: u16,
    /// `+1` or `-1`.
    pub p: i8,
}

impl Event {
    pub fn new(t: f64, x: u16, y: u16, p: i8) -> Self {
        Event { t, x, y, p }
    }

    /// Total order used for every stream: time, then row, column, polarity.
    pub fn order(&self, other: &Event) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.y.cmp(&other.y))
            .then(self.x.cmp(&other.x))
            .then(self.p.cmp(&other.p))
    }

    fn bit_eq(&self, other: &Event) -> bool {
        self.t.to_bits() == other.t.to_bits()
            && self.x == other.x
            && self.y == other.y
            && self.p == other.p
    }
}

/// Events of one sensor, sorted by [`Event::order`].
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    width: usize,
    height: usize,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates coordinates and polarities, snaps times to the clock tick,
    /// then sorts. On the tick grid, mirroring a window is exact.
    pub fn new(width: usize, height: usize, mut events: Vec<Event>) -> Result<Self> {
        for e in &mut events {
            validate_event(e, width, height)?;
            e.t = snap_to_tick(e.t);
        }
        events.sort_by(Event::order);
        Ok(EventStream {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        EventStream {
            width,
            height,
            events: Vec::new(),
        }
    }

    /// Builds a stream from events already validated and in order.
    pub(crate) fn from_sorted_unchecked(width: usize, height: usize, events: Vec<Event>) -> Self {
        debug_assert!(events
            .windows(2)
            .all(|w| w[0].order(&w[1]) != Ordering::Greater));
        EventStream {
            width,
            height,
            events,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    /// Signed polarity sum.
    pub fn polarity_sum(&self) -> i64 {
        self.events.iter().map(|e| e.p as i64).sum()
    }

    /// Bitwise equality, including timestamp bit patterns.
    pub fn bit_identical(&self, other: &EventStream) -> bool {
        self.dims() == other.dims()
            && self.events.len() == other.events.len()
            && self
                .events
                .iter()
                .zip(&other.events)
                .all(|(a, b)| a.bit_eq(b))
    }

    /// Checks that every event falls inside `[t_start, t_end]`.
    pub fn check_window(&self, t_start: f64, t_end: f64) -> Result<()> {
        if let Some(e) = self
            .events
            .iter()
            .find(|e| !(e.t >= t_start && e.t <= t_end))
        {
            return Err(Error::EventOutsideWindow {
                t: e.t,
                t_start,
                t_end,
            });
        }
        Ok(())
    }

    /// Writes the `EVT1` container.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"EVT1")?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        let mut rec = [0u8; RECORD_LEN];
        for e in &self.events {
            rec[0..8].copy_from_slice(&e.t.to_le_bytes());
            rec[8..10].copy_from_slice(&e.x.to_le_bytes());
            rec[10..12].copy_from_slice(&e.y.to_le_bytes());
            rec[12] = e.p as u8;
            rec[13] = 0;
            w.write_all(&rec)?;
        }
        Ok(())
    }

    /// Reads the `EVT1` container, rejecting malformed records.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 20];
        r.read_exact(&mut header)
            .map_err(|_| Error::format("EVT1", "truncated header"))?;
        if &header[0..4] != b"EVT1" {
            return Err(Error::format("EVT1", "bad magic"));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if (body.len() as u64) != count.saturating_mul(RECORD_LEN as u64) {
            return Err(Error::format(
                "EVT1",
                format!(
                    "header announces {count} records but body holds {} bytes",
                    body.len()
                ),
            ));
        }
        let mut events = Vec::with_capacity(count as usize);
        for rec in body.chunks_exact(RECORD_LEN) {
            let t = f64::from_le_bytes(rec[0..8].try_into().unwrap());
            let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
            let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
            let p = rec[12] as i8;
            if rec[13] != 0 {
                return Err(Error::format("EVT1", "nonzero pad byte"));
            }
            let e = Event { t, x, y, p };
            validate_event(&e, width, height)
                .map_err(|err| Error::format("EVT1", err.to_string()))?;
            events.push(e);
        }
        if events
            .windows(2)
            .any(|w| w[0].order(&w[1]) == Ordering::Greater)
        {
            return Err(Error::format("EVT1", "records are not sorted"));
        }
        Ok(EventStream {
            width,
            height,
            events,
        })
    }
}

/// Bytes per stored event: f64 t, u16 x, u16 y, i8 p, u8 pad.
pub const RECORD_LEN: usize = 14;

fn validate_event(e: &Event, width: usize, height: usize) -> Result<()> {
    if (e.x as usize) >= width || (e.y as usize) >= height {
        return Err(Error::invalid(format!(
            "event at ({}, {}) outside {}x{} sensor",
            e.x, e.y, width, height
        )));
    }
    if e.p != 1 && e.p != -1 {
        return Err(Error::invalid(format!(
            "polarity {} not in {{-1, +1}}",
            e.p
        )));
    }
    if !e.t.is_finite() || e.t < 0.0 {
        return Err(Error::invalid(format!(
            "timestamp {} is not a non-negative real",
            e.t
        )));
    }
    Ok(())
}

/// Mirrors a stream in time over `[t_start, t_end]` and flips polarities.
pub fn reverse_stream(s: &EventStream, t_start: f64, t_end: f64) -> Result<EventStream> {
    if !(t_start <= t_end) {
        return Err(Error::invalid(format!(
            "inverted window [{t_start}, {t_end}]"
        )));
    }
    s.check_window(t_start, t_end)?;
    let span = t_start + t_end;
    let mut events: Vec<Event> = s
        .events
        .iter()
        .map(|e| Event {
            t: span - e.t,
            x: e.x,
            y: e.y,
            p: -e.p,
        })
        .collect();
    events.sort_by(Event::order);
    Ok(EventStream::from_sorted_unchecked(
        s.width, s.height, events,
    ))
}

/// Events with `t0 <= t < t1`, order preserved.
pub fn slice_stream(s: &EventStream, t0: f64, t1: f64) -> Result<EventStream> {
    if !(t0 < t1) {
        return Err(Error::invalid(format!("inverted interval [{t0}, {t1})")));
    }
    let lo = s.events.partition_point(|e| e.t < t0);
    let hi = s.events.partition_point(|e| e.t < t1);
    Ok(EventStream::from_sorted_unchecked(
        s.width,
        s.height,
        s.events[lo..hi.max(lo)].to_vec(),
    ))
}

/// Events with `t0 <= t <= t1`.
pub fn window_stream(s: &EventStream, t0: f64, t1: f64) -> Result<EventStream> {
    if !(t0 < t1) {
        return Err(Error::invalid(format!("inverted interval [{t0}, {t1}]")));
    }
    let lo = s.events.partition_point(|e| e.t < t0);
    let hi = s.events.partition_point(|e| e.t <= t1);
    Ok(EventStream::from_sorted_unchecked(
        s.width,
        s.height,
        s.events[lo..hi.max(lo)].to_vec(),
    ))
}

/// Marks every pixel that saw at least one event, ignoring polarity.
pub fn accumulate_event_frame(s: &EventStream) -> BinaryImage {
    let mut img = BinaryImage::filled(s.width, s.height, false);
    for e in &s.events {
        img.set(e.x as usize, e.y as usize, true);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: f64, x: u16, y: u16, p: i8) -> Event {
        Event::new(t, x, y, p)
    }

    #[test]
    fn new_sorts_with_tie_order() {
        let s = EventStream::new(
            4,
            4,
            vec![
                ev(0.5, 1, 1, 1),
                ev(0.5, 0, 1, 1),
                ev(0.5, 3, 0, -1),
                ev(0.1, 2, 2, 1),
            ],
        )
        .unwrap();
        let order: Vec<(u16, u16)> = s.iter().map(|e| (e.x, e.y)).collect();
        assert_eq!(order, vec![(2, 2), (3, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn new_rejects_bad_events() {
        assert!(EventStream::new(2, 2, vec![ev(0.0, 2, 0, 1)]).is_err());
        assert!(EventStream::new(2, 2, vec![ev(0.0, 0, 0, 0)]).is_err());
        assert!(EventStream::new(2, 2, vec![ev(-1.0, 0, 0, 1)]).is_err());
    }

    #[test]
    fn reverse_empty_stream() {
        let s = EventStream::empty(3, 3);
        assert!(reverse_stream(&s, 0.0, 1.0).unwrap().is_empty());
    }

    #[test]
    fn reverse_single_event() {
        let s = EventStream::new(8, 8, vec![ev(0.3, 5, 6, 1)]).unwrap();
        let r = reverse_stream(&s, 0.0, 1.0).unwrap();
        assert_eq!(r.len(), 1);
        let e = r.events()[0];
        assert_eq!(e.t, 1.0 - snap_to_tick(0.3));
        assert!((e.t - 0.7).abs() <= TICK);
        assert_eq!((e.x, e.y, e.p), (5, 6, -1));
    }

    #[test]
    fn reverse_rejects_out_of_window() {
        let s = EventStream::new(8, 8, vec![ev(1.5, 0, 0, 1)]).unwrap();
        assert!(matches!(
            reverse_stream(&s, 0.0, 1.0),
            Err(Error::EventOutsideWindow { .. })
        ));
    }

    #[test]
    fn slice_full_and_empty() {
        let s = EventStream::new(4, 4, vec![ev(0.1, 0, 0, 1), ev(0.9, 1, 1, -1)]).unwrap();
        assert_eq!(slice_stream(&s, 0.0, 1.0).unwrap(), s);
        assert!(slice_stream(&s, 0.3, 0.6).unwrap().is_empty());
        assert!(slice_stream(&s, 0.6, 0.3).is_err());
        assert!(slice_stream(&s, 0.3, 0.3).is_err());
    }

    #[test]
    fn accumulate_ignores_count_and_polarity() {
        let s = EventStream::new(
            3,
            2,
            vec![ev(0.1, 2, 1, 1), ev(0.2, 2, 1, -1), ev(0.3, 2, 1, 1)],
        )
        .unwrap();
        let f = accumulate_event_frame(&s);
        assert!(*f.get(2, 1));
        assert_eq!(f.count_ones(), 1);
        assert_eq!(
            accumulate_event_frame(&EventStream::empty(3, 2)).count_ones(),
            0
        );
    }

    #[test]
    fn file_roundtrip_and_rejections() {
        let s = EventStream::new(
            10,
            7,
            vec![ev(0.25, 9, 6, 1), ev(0.125, 0, 0, -1), ev(0.125, 3, 0, 1)],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 20 + 3 * RECORD_LEN);
        let back = EventStream::read_from(&buf[..]).unwrap();
        assert!(back.bit_identical(&s));

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(EventStream::read_from(&bad[..]).is_err());

        let mut bad = buf.clone();
        // x of the first record -> 10, out of bounds
        bad[20 + 8] = 10;
        assert!(EventStream::read_from(&bad[..]).is_err());

        let mut bad = buf.clone();
        bad[20 + 12] = 0;
        assert!(EventStream::read_from(&bad[..]).is_err());

        let mut bad = buf.clone();
        bad.truncate(buf.len() - 1);
        assert!(EventStream::read_from(&bad[..]).is_err());
    }
}
