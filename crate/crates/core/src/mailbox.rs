//! Token-quantum contract for asynchronous actions.
//!
//! The ticker side ([`AsyncAction`]) lives in the tree and deposits one token
//! per tick into a mailbox of capacity one. The worker side
//! ([`QuantumWorker`]) polls the mailbox once per quantum: a token buys one
//! uninterrupted step of the wrapped behavior, an empty mailbox halts it. As
//! long as ticks arrive at least twice per quantum the worker never finds the
//! mailbox empty; once ticks stop, the worker halts within one quantum.
//!
//! The mailbox and the progress/status cells are the only state shared
//! between the two sides.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::behavior::Behavior;
use crate::status::NodeStatus;

/// Single-slot token mailbox, safe for one producer and one consumer.
#[derive(Debug, Default)]
pub struct TokenMailbox {
    token: AtomicBool,
}

impl TokenMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Deposits a token. Returns `false` if one was already present, in
    /// which case nothing accumulates.
    pub fn deposit(&self) -> bool {
        !self.token.swap(true, Ordering::AcqRel)
    }

    /// Consumes the token if present.
    pub fn take(&self) -> bool {
        self.token.swap(false, Ordering::AcqRel)
    }

    pub fn drain(&self) {
        self.token.store(false, Ordering::Release);
    }

    pub fn occupancy(&self) -> usize {
        usize::from(self.token.load(Ordering::Acquire))
    }
}

const RUNNING: u8 = 0;
const SUCCESS: u8 = 1;
const FAILURE: u8 = 2;

#[derive(Debug, Default)]
struct Shared {
    mailbox: TokenMailbox,
    progress: AtomicU64,
    status: AtomicU8,
    halted: AtomicBool,
}

impl Shared {
    fn progress(&self) -> f64 {
        f64::from_bits(self.progress.load(Ordering::Acquire))
    }

    fn status(&self) -> NodeStatus {
        match self.status.load(Ordering::Acquire) {
            SUCCESS => NodeStatus::Success,
            FAILURE => NodeStatus::Failure,
            _ => NodeStatus::Running,
        }
    }
}

/// Creates the two ends of an asynchronous action around `behavior`.
pub fn async_action(behavior: Box<dyn Behavior>) -> (AsyncAction, QuantumWorker) {
    let shared = Arc::new(Shared::default());
    shared
        .progress
        .store(behavior.progress().to_bits(), Ordering::Release);
    (
        AsyncAction {
            shared: Arc::clone(&shared),
        },
        QuantumWorker {
            shared,
            behavior,
            steps: 0,
            halts: 0,
        },
    )
}

/// Tree-side handle: each tick deposits a token and reports the latest
/// status published by the worker.
#[derive(Debug)]
pub struct AsyncAction {
    shared: Arc<Shared>,
}

impl AsyncAction {
    pub fn mailbox_occupancy(&self) -> usize {
        self.shared.mailbox.occupancy()
    }
}

impl Behavior for AsyncAction {
    fn tick(&mut self) -> NodeStatus {
        let status = self.shared.status();
        if status.is_terminal() {
            return status;
        }
        self.shared.halted.store(false, Ordering::Release);
        self.shared.mailbox.deposit();
        NodeStatus::Running
    }

    fn progress(&self) -> f64 {
        self.shared.progress()
    }

    fn halt(&mut self) {
        self.shared.mailbox.drain();
    }
}

/// What the worker did in one quantum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantumOutcome {
    /// A token was consumed and the behavior advanced one step.
    Stepped(NodeStatus),
    /// No token: the behavior was halted (or already idle).
    Halted,
    /// The behavior already finished; tokens are ignored.
    Finished(NodeStatus),
}

/// Worker-side handle owning the wrapped behavior.
pub struct QuantumWorker {
    shared: Arc<Shared>,
    behavior: Box<dyn Behavior>,
    steps: u64,
    halts: u64,
}

impl QuantumWorker {
    /// Runs one quantum.
    pub fn poll(&mut self) -> QuantumOutcome {
        let status = self.shared.status();
        if status.is_terminal() {
            self.shared.mailbox.drain();
            return QuantumOutcome::Finished(status);
        }
        if !self.shared.mailbox.take() {
            if !self.shared.halted.swap(true, Ordering::AcqRel) {
                self.behavior.halt();
                self.halts += 1;
            }
            return QuantumOutcome::Halted;
        }
        let status = self.behavior.tick();
        self.steps += 1;
        self.shared
            .progress
            .store(self.behavior.progress().to_bits(), Ordering::Release);
        let code = match status {
            NodeStatus::Running => RUNNING,
            NodeStatus::Success => SUCCESS,
            NodeStatus::Failure => FAILURE,
        };
        self.shared.status.store(code, Ordering::Release);
        QuantumOutcome::Stepped(status)
    }

    /// Steps performed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of times the behavior was halted for lack of a token.
    pub fn halts(&self) -> u64 {
        self.halts
    }

    pub fn progress(&self) -> f64 {
        self.shared.progress()
    }

    /// Polls once per `quantum` on a background thread until `stop` is set
    /// or the behavior finishes. The worker is handed back on join.
    pub fn spawn(
        mut self,
        quantum: Duration,
        stop: Arc<AtomicBool>,
    ) -> thread::JoinHandle<QuantumWorker> {
        thread::spawn(move || {
            while !stop.load(Ordering::Acquire) {
                thread::sleep(quantum);
                if let QuantumOutcome::Finished(_) = self.poll() {
                    break;
                }
            }
            self
        })
    }
}
