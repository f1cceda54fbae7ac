//! Deterministic in-memory link with latency and seeded drops.
//!
//! Time is a tick counter advanced by the caller. A sent frame is either
//! dropped on enqueue (the sender is not told) or delivered in FIFO order
//! once its latency has elapsed. Two independent directions share the clock.

use alloc::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::frame::{Frame, FrameError, MAX_FRAME};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub latency_ticks: u64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            latency_ticks: 1,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::AToB => 0,
            Direction::BToA => 1,
        }
    }
}

/// Counters for observability; the roles driving the link never read these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

#[derive(Debug)]
pub struct SimulatedLink {
    now: u64,
    latency: u64,
    drop_probability: f64,
    rng: ChaCha20Rng,
    queues: [VecDeque<(u64, Frame)>; 2],
    stats: [LinkStats; 2],
}

impl SimulatedLink {
    pub fn new(config: &LinkConfig) -> Self {
        SimulatedLink {
            now: 0,
            latency: config.latency_ticks,
            drop_probability: config.drop_probability.clamp(0.0, 1.0),
            rng: ChaCha20Rng::seed_from_u64(config.seed),
            queues: [VecDeque::new(), VecDeque::new()],
            stats: [LinkStats::default(), LinkStats::default()],
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn tick(&mut self) {
        self.now += 1;
    }

    /// Queues a frame for delivery after the link latency. A seeded coin
    /// decides drops; the send itself always succeeds so the sender cannot
    /// tell (only an oversized frame errors).
    pub fn send(&mut self, direction: Direction, frame: Frame) -> Result<(), FrameError> {
        if frame.payload.len() + 1 > MAX_FRAME {
            return Err(FrameError::TooLarge(frame.payload.len() + 1));
        }
        let i = direction.index();
        self.stats[i].sent += 1;
        if self.drop_probability > 0.0 && self.rng.gen::<f64>() < self.drop_probability {
            self.stats[i].dropped += 1;
            return Ok(());
        }
        self.queues[i].push_back((self.now + self.latency, frame));
        Ok(())
    }

    /// Pops the next frame whose delivery time has arrived. FIFO per
    /// direction, so surviving frames are never reordered.
    pub fn recv(&mut self, direction: Direction) -> Option<Frame> {
        let i = direction.index();
        match self.queues[i].front() {
            Some((due, _)) if *due <= self.now => {
                let (_, frame) = self.queues[i].pop_front().expect("front exists");
                self.stats[i].delivered += 1;
                Some(frame)
            }
            _ => None,
        }
    }

    /// Advances time until a frame is deliverable in `direction` or `max`
    /// ticks pass; returns the frame if one arrived.
    pub fn recv_within(&mut self, direction: Direction, max: u64) -> Option<Frame> {
        for _ in 0..=max {
            if let Some(frame) = self.recv(direction) {
                return Some(frame);
            }
            self.tick();
        }
        None
    }

    pub fn stats(&self, direction: Direction) -> LinkStats {
        self.stats[direction.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn frame(tag: u8) -> Frame {
        Frame {
            msg_type: 1,
            payload: alloc::vec![tag],
        }
    }

    #[test]
    fn delivery_respects_latency() {
        let mut link = SimulatedLink::new(&LinkConfig {
            latency_ticks: 3,
            drop_probability: 0.0,
            seed: 0,
        });
        link.send(Direction::AToB, frame(7)).unwrap();
        for _ in 0..3 {
            assert_eq!(link.recv(Direction::AToB), None);
            link.tick();
        }
        assert_eq!(link.recv(Direction::AToB).unwrap().payload, &[7]);
        assert_eq!(link.recv(Direction::AToB), None);
    }

    #[test]
    fn fifo_order_preserved() {
        let mut link = SimulatedLink::new(&LinkConfig::default());
        for tag in 0..10u8 {
            link.send(Direction::BToA, frame(tag)).unwrap();
        }
        link.tick();
        let got: Vec<u8> = core::iter::from_fn(|| link.recv(Direction::BToA))
            .map(|f| f.payload[0])
            .collect();
        assert_eq!(got, (0..10u8).collect::<Vec<_>>());
    }

    #[test]
    fn directions_are_independent() {
        let mut link = SimulatedLink::new(&LinkConfig {
            latency_ticks: 0,
            ..LinkConfig::default()
        });
        link.send(Direction::AToB, frame(1)).unwrap();
        assert_eq!(link.recv(Direction::BToA), None);
        assert_eq!(link.recv(Direction::AToB).unwrap().payload, &[1]);
    }

    #[test]
    fn same_seed_same_drop_schedule() {
        let config = LinkConfig {
            latency_ticks: 0,
            drop_probability: 0.3,
            seed: 99,
        };
        let run = || {
            let mut link = SimulatedLink::new(&config);
            let mut delivered = Vec::new();
            for tag in 0..100u8 {
                link.send(Direction::AToB, frame(tag)).unwrap();
                if let Some(f) = link.recv(Direction::AToB) {
                    delivered.push(f.payload[0]);
                }
            }
            delivered
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.len() < 100, "some frames must drop at p=0.3");
    }

    #[test]
    fn half_drop_rate_lands_in_binomial_band() {
        let mut link = SimulatedLink::new(&LinkConfig {
            latency_ticks: 0,
            drop_probability: 0.5,
            seed: 12345,
        });
        let mut delivered = 0u32;
        for _ in 0..1000 {
            link.send(Direction::AToB, frame(0)).unwrap();
            if link.recv(Direction::AToB).is_some() {
                delivered += 1;
            }
        }
        assert!(
            (455..=545).contains(&delivered),
            "delivered {delivered} of 1000 at p=0.5"
        );
    }

    #[test]
    fn sender_cannot_observe_drops() {
        let mut link = SimulatedLink::new(&LinkConfig {
            latency_ticks: 0,
            drop_probability: 1.0,
            seed: 1,
        });
        assert_eq!(link.send(Direction::AToB, frame(0)), Ok(()));
        link.tick();
        assert_eq!(link.recv(Direction::AToB), None);
    }

    #[test]
    fn zero_drop_delivers_everything() {
        let mut link = SimulatedLink::new(&LinkConfig {
            latency_ticks: 2,
            drop_probability: 0.0,
            seed: 7,
        });
        for tag in 0..50u8 {
            link.send(Direction::AToB, frame(tag)).unwrap();
        }
        let mut got = 0;
        while link.recv_within(Direction::AToB, 3).is_some() {
            got += 1;
        }
        assert_eq!(got, 50);
        assert_eq!(link.stats(Direction::AToB).delivered, 50);
        assert_eq!(link.stats(Direction::AToB).dropped, 0);
    }
}
