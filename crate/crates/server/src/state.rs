use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock, RwLock};

use chrono::Utc;
use tokio::sync::Mutex;

use crowdrate_core::engine::{evaluate, Evaluation};
use crowdrate_core::event_store::{write_snapshot, Journal, StoreError};
use crowdrate_core::{Event, EventPayload, GameState, Timestamp};

/// Where the service takes "now" from when it records a submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    /// Host wall clock, never earlier than the last logged event.
    System,
    /// The timestamp of the last logged event. Useful for replayed or
    /// simulated markets whose prices are in the past.
    Log,
    Fixed(Timestamp),
}

impl Clock {
    fn now(&self, state: &GameState) -> Timestamp {
        let wall = match self {
            Clock::System => Utc::now(),
            Clock::Log => state.last_at.unwrap_or_else(Utc::now),
            Clock::Fixed(t) => *t,
        };
        state.last_at.map_or(wall, |last| wall.max(last))
    }
}

/// One immutable view of the game. Its evaluation is computed on first read
/// and shared by every later reader of the same sequence number.
#[derive(Debug)]
pub struct Snapshot {
    pub state: GameState,
    evaluation: OnceLock<Arc<Evaluation>>,
}

impl Snapshot {
    fn new(state: GameState) -> Self {
        Self { state, evaluation: OnceLock::new() }
    }

    pub fn sequence(&self) -> u64 {
        self.state.last_sequence
    }

    pub fn evaluation(&self) -> Arc<Evaluation> {
        self.evaluation.get_or_init(|| Arc::new(evaluate(&self.state))).clone()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SnapshotPolicy {
    pub dir: Option<PathBuf>,
    /// Write a snapshot after every this many events.
    pub every: Option<u64>,
}

struct Inner {
    journal: Mutex<Journal>,
    current: RwLock<Arc<Snapshot>>,
    clock: Clock,
    snapshots: SnapshotPolicy,
}

/// Shared service state: a single writer behind a mutex and a swap-on-write
/// read snapshot.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn open(log: &Path, clock: Clock, snapshots: SnapshotPolicy) -> Result<Self, StoreError> {
        let journal = match &snapshots.dir {
            Some(dir) => Journal::open_with_snapshots(log, dir)?,
            None => Journal::open(log)?,
        };
        Ok(Self::from_journal(journal, clock, snapshots))
    }

    pub fn from_journal(journal: Journal, clock: Clock, snapshots: SnapshotPolicy) -> Self {
        let current = Arc::new(Snapshot::new(journal.state().clone()));
        Self {
            inner: Arc::new(Inner { journal: Mutex::new(journal), current: RwLock::new(current), clock, snapshots }),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.inner.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Records one event built from the current state and the service clock.
    /// `build` sees the state and "now"; whatever it returns is validated,
    /// appended and published.
    pub async fn record<T, E>(
        &self,
        build: impl FnOnce(&GameState, Timestamp) -> Result<(EventPayload, T), E>,
    ) -> Result<(Event, T), E>
    where
        E: From<StoreError>,
    {
        let (mut events, extra) = self
            .record_batch(|state, now| build(state, now).map(|(payload, extra)| (vec![(now, payload)], extra)))
            .await?;
        Ok((events.pop().expect("one event recorded"), extra))
    }

    /// Batch form of [`AppState::record`]; `build` stamps each event itself.
    /// Nothing is written unless the whole batch validates.
    pub async fn record_batch<T, E>(
        &self,
        build: impl FnOnce(&GameState, Timestamp) -> Result<(Vec<(Timestamp, EventPayload)>, T), E>,
    ) -> Result<(Vec<Event>, T), E>
    where
        E: From<StoreError>,
    {
        let mut journal = self.inner.journal.lock().await;
        let now = self.inner.clock.now(journal.state());
        let (batch, extra) = build(journal.state(), now)?;
        let before = journal.log().len();
        let events = journal.record_all(batch)?;

        if let (Some(dir), Some(every)) = (&self.inner.snapshots.dir, self.inner.snapshots.every) {
            let crossed = every > 0 && journal.log().len() / every > before / every;
            if crossed {
                if let Err(e) = write_snapshot(dir, journal.state()) {
                    tracing::warn!("snapshot at {} failed: {e}", journal.log().len());
                }
            }
        }

        let next = Arc::new(Snapshot::new(journal.state().clone()));
        *self.inner.current.write().expect("snapshot lock poisoned") = next;
        Ok((events, extra))
    }

    pub fn clock(&self) -> Clock {
        self.inner.clock
    }

    pub async fn log_len(&self) -> u64 {
        self.inner.journal.lock().await.log().len()
    }
}
