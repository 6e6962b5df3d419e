//! Loopback link impairment: seeded packet loss plus fixed latency and jitter.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkImpairment {
    /// Probability that a datagram is silently dropped.
    pub loss: f64,
    pub latency_ms: f64,
    /// Uniform extra delay in [0, jitter_ms).
    pub jitter_ms: f64,
}

impl Default for LinkImpairment {
    fn default() -> Self {
        Self { loss: 0.0, latency_ms: 0.0, jitter_ms: 0.0 }
    }
}

impl LinkImpairment {
    pub fn is_transparent(&self) -> bool {
        self.loss <= 0.0 && self.latency_ms <= 0.0 && self.jitter_ms <= 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub offered: u64,
    pub dropped: u64,
}

struct Delayed {
    due: Instant,
    order: u64,
    bytes: Vec<u8>,
    to: SocketAddr,
}

impl PartialEq for Delayed {
    fn eq(&self, other: &Self) -> bool {
        (self.due, self.order) == (other.due, other.order)
    }
}
impl Eq for Delayed {}
impl PartialOrd for Delayed {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Delayed {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.due, self.order).cmp(&(other.due, other.order))
    }
}

/// Sends datagrams through a simulated lossy, delayed link.
///
/// Loss decisions come from a seeded generator so a given send order always
/// drops the same datagrams. Delayed datagrams are released by a helper thread.
pub struct ImpairedSender {
    socket: UdpSocket,
    cfg: LinkImpairment,
    rng: ChaCha8Rng,
    stats: LinkStats,
    delay: Option<(Sender<Delayed>, JoinHandle<()>)>,
    order: u64,
}

impl ImpairedSender {
    pub fn new(socket: &UdpSocket, cfg: LinkImpairment, seed: u64) -> io::Result<Self> {
        let socket = socket.try_clone()?;
        let delay = if cfg.latency_ms > 0.0 || cfg.jitter_ms > 0.0 {
            let (tx, rx) = mpsc::channel();
            let out = socket.try_clone()?;
            let handle = std::thread::Builder::new().name("link-delay".into()).spawn(move || delay_loop(out, rx))?;
            Some((tx, handle))
        } else {
            None
        };
        Ok(Self { socket, cfg, rng: ChaCha8Rng::seed_from_u64(seed), stats: LinkStats::default(), delay, order: 0 })
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Returns `Ok(false)` when the simulated link dropped the datagram.
    pub fn send_to(&mut self, bytes: &[u8], to: SocketAddr) -> io::Result<bool> {
        self.stats.offered += 1;
        let lost = self.cfg.loss > 0.0 && self.rng.random_bool(self.cfg.loss.min(1.0));
        let jitter = if self.cfg.jitter_ms > 0.0 { self.rng.random_range(0.0..self.cfg.jitter_ms) } else { 0.0 };
        if lost {
            self.stats.dropped += 1;
            return Ok(false);
        }
        match &self.delay {
            None => {
                self.socket.send_to(bytes, to)?;
            }
            Some((tx, _)) => {
                let due = Instant::now() + Duration::from_secs_f64((self.cfg.latency_ms + jitter) / 1000.0);
                self.order += 1;
                let _ = tx.send(Delayed { due, order: self.order, bytes: bytes.to_vec(), to });
            }
        }
        Ok(true)
    }
}

impl Drop for ImpairedSender {
    fn drop(&mut self) {
        if let Some((tx, handle)) = self.delay.take() {
            drop(tx);
            let _ = handle.join();
        }
    }
}

fn delay_loop(socket: UdpSocket, rx: Receiver<Delayed>) {
    let mut heap: BinaryHeap<Reverse<Delayed>> = BinaryHeap::new();
    let mut open = true;
    while open || !heap.is_empty() {
        let now = Instant::now();
        while heap.peek().is_some_and(|Reverse(d)| d.due <= now) {
            let Reverse(d) = heap.pop().unwrap();
            let _ = socket.send_to(&d.bytes, d.to);
        }
        let wait = heap.peek().map(|Reverse(d)| d.due.saturating_duration_since(now)).unwrap_or(Duration::from_millis(50));
        if !open {
            std::thread::sleep(wait);
            continue;
        }
        match rx.recv_timeout(wait) {
            Ok(d) => heap.push(Reverse(d)),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => open = false,
        }
    }
}
