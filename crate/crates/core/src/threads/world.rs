//! Stop-the-world handshake.
//!
//! A thread that fails an allocation asks to become the collector. Every
//! other running thread is counted as pending and pauses at its next
//! allocation or yield point; threads inside blocking sections are not
//! waited for and cannot leave until the world reopens. Once nothing is
//! pending the world is stopped and the collector runs alone.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, Ordering};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex, MutexGuard};

use crate::error::GcError;
use crate::threads::{ThreadId, ThreadSlot, ThreadState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Phase {
    Open = 0,
    StopRequested = 1,
    Stopped = 2,
}

/// Result of asking to stop the world.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopOutcome {
    /// The caller is the collector and the world is stopped.
    Elected,
    /// Another thread was already collecting; the caller paused until that
    /// cycle finished and should retry whatever it was doing.
    CollectedByOther,
}

pub(crate) struct WorldState {
    pub phase: Phase,
    pub collector: Option<ThreadId>,
    /// Running threads the collector still waits for.
    pub pending: usize,
    /// Registered threads in the `Running` state.
    pub running: usize,
    stopped_at: Option<Instant>,
}

pub(crate) struct World {
    state: Mutex<WorldState>,
    resumed: Condvar,
    drained: Condvar,
    stop_flag: AtomicBool,
    phase_mirror: AtomicU8,
    active_collectors: AtomicU64,
    pub max_collectors: AtomicU64,
    pub stops: AtomicU64,
    pub cursor_violations: AtomicU64,
}

impl World {
    pub fn new() -> World {
        World {
            state: Mutex::new(WorldState {
                phase: Phase::Open,
                collector: None,
                pending: 0,
                running: 0,
                stopped_at: None,
            }),
            resumed: Condvar::new(),
            drained: Condvar::new(),
            stop_flag: AtomicBool::new(false),
            phase_mirror: AtomicU8::new(Phase::Open as u8),
            active_collectors: AtomicU64::new(0),
            max_collectors: AtomicU64::new(0),
            stops: AtomicU64::new(0),
            cursor_violations: AtomicU64::new(0),
        }
    }

    #[inline]
    pub fn stop_requested(&self) -> bool {
        self.stop_flag.load(Ordering::Acquire)
    }

    #[inline]
    pub fn is_stopped(&self) -> bool {
        self.phase_mirror.load(Ordering::SeqCst) == Phase::Stopped as u8
    }

    pub fn phase(&self) -> Phase {
        self.state.lock().phase
    }

    pub fn collector(&self) -> Option<ThreadId> {
        self.state.lock().collector
    }

    fn set_phase(&self, st: &mut WorldState, phase: Phase) {
        st.phase = phase;
        self.phase_mirror.store(phase as u8, Ordering::SeqCst);
        self.stop_flag.store(phase != Phase::Open, Ordering::Release);
    }

    fn wait_open(&self, st: &mut MutexGuard<'_, WorldState>) {
        while st.phase != Phase::Open {
            self.resumed.wait(st);
        }
    }

    /// Parks a running thread until the world reopens.
    fn pause_locked(&self, st: &mut MutexGuard<'_, WorldState>, slot: &ThreadSlot) {
        slot.set_state(ThreadState::SafepointPaused);
        if st.phase == Phase::StopRequested {
            st.pending -= 1;
            if st.pending == 0 {
                self.drained.notify_all();
            }
        }
        st.running -= 1;
        self.wait_open(st);
        st.running += 1;
        slot.set_state(ThreadState::Running);
    }

    /// Admits a new thread once the world is open; `publish` runs under the
    /// world lock so the thread becomes visible atomically.
    pub fn admit(&self, slot: &ThreadSlot, publish: impl FnOnce()) {
        let mut st = self.state.lock();
        self.wait_open(&mut st);
        st.running += 1;
        slot.set_state(ThreadState::Running);
        publish();
    }

    /// Deregistration barrier: waits out any stop in progress, then runs
    /// `unpublish` with the world open.
    pub fn depart(&self, slot: &ThreadSlot, unpublish: impl FnOnce()) {
        let mut st = self.state.lock();
        while st.phase != Phase::Open {
            self.pause_locked(&mut st, slot);
        }
        st.running -= 1;
        slot.set_state(ThreadState::Detached);
        unpublish();
    }

    pub fn safepoint(&self, slot: &ThreadSlot) {
        if !self.stop_requested() {
            return;
        }
        let mut st = self.state.lock();
        if st.phase == Phase::Open || st.collector == Some(slot.id) {
            return;
        }
        self.pause_locked(&mut st, slot);
    }

    pub fn enter_blocking(&self, slot: &ThreadSlot) -> Result<(), GcError> {
        let mut st = self.state.lock();
        if slot.state() != ThreadState::Running {
            return Err(GcError::ProtocolViolation(
                "enter_blocking_section from a thread that is not running",
            ));
        }
        slot.set_state(ThreadState::Blocked);
        st.running -= 1;
        if st.phase == Phase::StopRequested {
            st.pending -= 1;
            if st.pending == 0 {
                self.drained.notify_all();
            }
        }
        Ok(())
    }

    pub fn leave_blocking(&self, slot: &ThreadSlot) -> Result<(), GcError> {
        let mut st = self.state.lock();
        if slot.state() != ThreadState::Blocked {
            return Err(GcError::ProtocolViolation(
                "leave_blocking_section without a matching enter",
            ));
        }
        self.wait_open(&mut st);
        st.running += 1;
        slot.set_state(ThreadState::Running);
        Ok(())
    }

    /// Elects the caller as collector and waits for every other running
    /// thread to pause, or pauses the caller if a collection is already
    /// under way. With a timeout, a stop that does not drain in time is
    /// abandoned and reported with the ids returned by `still_running`.
    pub fn request_stop(
        &self,
        slot: &ThreadSlot,
        timeout: Option<Duration>,
        still_running: impl FnOnce() -> Vec<ThreadId>,
    ) -> Result<StopOutcome, GcError> {
        let mut st = self.state.lock();
        if st.collector == Some(slot.id) {
            return Err(GcError::ProtocolViolation("thread is already the collector"));
        }
        if slot.state() != ThreadState::Running {
            return Err(GcError::ProtocolViolation("stop requested by a thread that is not running"));
        }
        if st.phase != Phase::Open {
            self.pause_locked(&mut st, slot);
            return Ok(StopOutcome::CollectedByOther);
        }
        st.collector = Some(slot.id);
        st.running -= 1;
        st.pending = st.running;
        st.stopped_at = Some(Instant::now());
        slot.set_state(ThreadState::Collecting);
        self.set_phase(&mut st, Phase::StopRequested);
        let active = self.active_collectors.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_collectors.fetch_max(active, Ordering::SeqCst);

        let deadline = timeout.map(|t| Instant::now() + t);
        while st.pending > 0 {
            match deadline {
                None => self.drained.wait(&mut st),
                Some(d) => {
                    if self.drained.wait_until(&mut st, d).timed_out() && st.pending > 0 {
                        let ids = still_running();
                        self.reopen(&mut st, slot);
                        return Err(GcError::StwTimeout { threads: ids });
                    }
                }
            }
        }
        self.set_phase(&mut st, Phase::Stopped);
        self.stops.fetch_add(1, Ordering::Relaxed);
        Ok(StopOutcome::Elected)
    }

    fn reopen(&self, st: &mut WorldState, slot: &ThreadSlot) -> Duration {
        self.set_phase(st, Phase::Open);
        st.collector = None;
        st.pending = 0;
        st.running += 1;
        slot.set_state(ThreadState::Running);
        self.active_collectors.fetch_sub(1, Ordering::SeqCst);
        self.resumed.notify_all();
        st.stopped_at.take().map_or(Duration::ZERO, |t| t.elapsed())
    }

    /// Reopens the world; returns how long it was held.
    pub fn resume(&self, slot: &ThreadSlot) -> Result<Duration, GcError> {
        let mut st = self.state.lock();
        if st.collector != Some(slot.id) || st.phase != Phase::Stopped {
            return Err(GcError::ProtocolViolation(
                "resume_world by a thread that does not hold the stopped world",
            ));
        }
        Ok(self.reopen(&mut st, slot))
    }
}
