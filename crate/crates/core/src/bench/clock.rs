use std::time::Instant;

/// Source of timestamps for one rank's measurements.
pub trait Clock: Send {
    /// Seconds since an arbitrary per-clock origin.
    fn now(&mut self) -> f64;
}

pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Advances by a fixed step on every reading, so timings depend only on
/// the sequence of calls.
pub struct FakeClock {
    t: f64,
    step: f64,
}

impl FakeClock {
    pub fn new(step: f64) -> Self {
        FakeClock { t: 0.0, step }
    }
}

impl Clock for FakeClock {
    fn now(&mut self) -> f64 {
        self.t += self.step;
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockKind {
    #[default]
    Wall,
    /// One millisecond per reading.
    Fake,
}

impl ClockKind {
    pub fn make(self) -> Box<dyn Clock> {
        match self {
            ClockKind::Wall => Box::new(WallClock::new()),
            ClockKind::Fake => Box::new(FakeClock::new(1e-3)),
        }
    }
}
