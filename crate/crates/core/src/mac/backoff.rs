//! Back-off draw sources.
//!
//! Production runs draw uniformly from the run RNG. Tests inject scripted
//! sequences so a simulated timeline can be compared draw-for-draw against
//! an independent oracle.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Source of back-off draws in `[0, cw]` (inclusive).
pub trait BackoffSource {
    fn draw(&mut self, cw: u16) -> u16;
}

/// Uniform draws from the run RNG.
pub struct RngBackoff(pub ChaCha12Rng);

impl BackoffSource for RngBackoff {
    fn draw(&mut self, cw: u16) -> u16 {
        self.0.random_range(0..=cw)
    }
}

/// Replays a fixed sequence; draws past the end return 0 and are counted
/// so an enumerator can detect that a longer script is needed.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackoff {
    pub script: Vec<u16>,
    pub used: usize,
}

impl ScriptedBackoff {
    pub fn new(script: Vec<u16>) -> Self {
        ScriptedBackoff { script, used: 0 }
    }

    /// Draws requested beyond the scripted prefix.
    pub fn overflowed(&self) -> bool {
        self.used > self.script.len()
    }
}

impl BackoffSource for ScriptedBackoff {
    fn draw(&mut self, cw: u16) -> u16 {
        let v = self.script.get(self.used).copied().unwrap_or(0);
        self.used += 1;
        v.min(cw)
    }
}

/// Wraps another source and logs every draw, letting a test replay the
/// exact sequence a seeded run consumed.
pub struct RecordingBackoff<S> {
    pub inner: S,
    pub drawn: Vec<u16>,
}

impl<S> RecordingBackoff<S> {
    pub fn new(inner: S) -> Self {
        RecordingBackoff {
            inner,
            drawn: Vec::new(),
        }
    }
}

impl<S: BackoffSource> BackoffSource for RecordingBackoff<S> {
    fn draw(&mut self, cw: u16) -> u16 {
        let v = self.inner.draw(cw);
        self.drawn.push(v);
        v
    }
}
