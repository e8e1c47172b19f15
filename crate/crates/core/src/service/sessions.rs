//! Live sessions hosted by the service.
//!
//! Each session owns one [`SessionHost`] behind an async mutex, so actions and
//! clock advances run one at a time in arrival order. Every accepted input
//! produces a new revision and its snapshot is kept in a bounded history that
//! streams read from.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;
use tokio::sync::watch;

use crate::dsl::{select_instruction_set, Barcode};
use crate::engine::Engine;
use crate::host::{HostSnapshot, SessionAction, SessionHost};
use crate::sim::{PreconditionViolated, SimConfig};

/// Snapshots kept per session for streams that are catching up.
pub const HISTORY_LIMIT: usize = 1024;
/// Largest single clock advance accepted, one day of virtual time.
pub const MAX_CLOCK_STEP_MILLIS: u64 = 86_400_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot {
    pub session_id: String,
    pub revision: u64,
    pub barcode: Barcode,
    pub ability_level: u32,
    pub set_id: String,
    #[serde(flatten)]
    pub host: HostSnapshot,
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("no session `{0}`")]
    UnknownSession(String),
    #[error("the session limit of {0} is reached")]
    LimitExceeded(usize),
    #[error("{0}")]
    Precondition(#[from] PreconditionViolated),
    #[error("clock advance must be between 1 and {MAX_CLOCK_STEP_MILLIS} ms, got {0}")]
    InvalidClockStep(u64),
    #[error("action `{0}` is not accepted here; advance the clock instead")]
    UnsupportedAction(&'static str),
    #[error("revision {requested} is no longer retained; oldest is {oldest}")]
    Lagged { requested: u64, oldest: u64 },
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub max_sessions: usize,
    pub idle_expiry: Duration,
    /// Virtual milliseconds per wall millisecond; zero disables the pump.
    pub time_scale: f64,
    pub engine: Engine,
    pub sim: SimConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            max_sessions: 64,
            idle_expiry: Duration::from_secs(30 * 60),
            time_scale: 0.0,
            engine: Engine::default(),
            sim: SimConfig::default(),
        }
    }
}

/// How often the real-time pump advances a session's clock.
const PUMP_PERIOD: Duration = Duration::from_millis(100);

struct Live {
    host: SessionHost,
    revision: u64,
    history: VecDeque<(u64, Arc<str>)>,
    latest: SessionSnapshot,
}

pub struct Slot {
    id: String,
    live: tokio::sync::Mutex<Live>,
    last_used: Mutex<Instant>,
    closed: AtomicBool,
    changed: watch::Sender<u64>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().unwrap_or_else(|p| p.into_inner()) = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_used.lock().unwrap_or_else(|p| p.into_inner()))
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.changed.send_modify(|_| {});
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    /// Records a new revision after the host changed.
    fn publish(&self, live: &mut Live) -> SessionSnapshot {
        live.revision += 1;
        let snap = SessionSnapshot { revision: live.revision, host: live.host.snapshot(), ..live.latest.clone() };
        push_history(&mut live.history, live.revision, &snap);
        live.latest = snap.clone();
        self.changed.send_replace(live.revision);
        snap
    }

    pub async fn latest(&self) -> SessionSnapshot {
        self.live.lock().await.latest.clone()
    }

    pub async fn act(&self, action: &SessionAction) -> Result<SessionSnapshot, SessionError> {
        if matches!(action, SessionAction::Wait) {
            return Err(SessionError::UnsupportedAction("Wait"));
        }
        self.touch();
        let mut live = self.live.lock().await;
        live.host.act(action)?;
        Ok(self.publish(&mut live))
    }

    pub async fn advance(&self, dt_millis: u64) -> Result<SessionSnapshot, SessionError> {
        if dt_millis == 0 || dt_millis > MAX_CLOCK_STEP_MILLIS {
            return Err(SessionError::InvalidClockStep(dt_millis));
        }
        self.touch();
        let mut live = self.live.lock().await;
        live.host.advance(dt_millis);
        Ok(self.publish(&mut live))
    }

    /// Serialized snapshots from revision `from` onward, oldest first.
    pub async fn since(&self, from: u64) -> Result<Vec<Arc<str>>, SessionError> {
        let live = self.live.lock().await;
        let oldest = live.history.front().map_or(live.revision, |(r, _)| *r);
        if from < oldest {
            return Err(SessionError::Lagged { requested: from, oldest });
        }
        Ok(live.history.iter().filter(|(r, _)| *r >= from).map(|(_, s)| s.clone()).collect())
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.changed.subscribe()
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

fn push_history(history: &mut VecDeque<(u64, Arc<str>)>, revision: u64, snap: &SessionSnapshot) {
    if history.len() == HISTORY_LIMIT {
        history.pop_front();
    }
    let json = serde_json::to_string(snap).expect("snapshots serialize");
    history.push_back((revision, json.into()));
}

pub struct Sessions {
    config: SessionConfig,
    slots: Mutex<HashMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

impl Sessions {
    pub fn new(config: SessionConfig) -> Self {
        Sessions { config, slots: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn slots(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<Slot>>> {
        self.slots.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Drops sessions idle for longer than the configured expiry.
    pub fn sweep(&self) {
        let now = Instant::now();
        self.slots().retain(|_, slot| {
            let keep = slot.idle_for(now) <= self.config.idle_expiry;
            if !keep {
                slot.close();
            }
            keep
        });
    }

    pub fn len(&self) -> usize {
        self.slots().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Starts a session on the instruction set matching `ability_level`.
    pub fn create(
        &self,
        resource: &crate::dsl::ProductResource,
        ability_level: u32,
    ) -> Result<(Arc<Slot>, SessionSnapshot), SessionError> {
        self.sweep();
        let set = select_instruction_set(resource, ability_level);
        let host = SessionHost::start(Arc::new(set.clone()), self.config.engine.clone(), self.config.sim.clone())
            .expect("stored resources are lint-clean");
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let snap = SessionSnapshot {
            session_id: id.clone(),
            revision: 0,
            barcode: resource.product.barcode.clone(),
            ability_level,
            set_id: set.id.clone(),
            host: host.snapshot(),
        };
        let mut history = VecDeque::new();
        push_history(&mut history, 0, &snap);
        let (changed, _) = watch::channel(0);
        let slot = Arc::new(Slot {
            id: id.clone(),
            live: tokio::sync::Mutex::new(Live { host, revision: 0, history, latest: snap.clone() }),
            last_used: Mutex::new(Instant::now()),
            closed: AtomicBool::new(false),
            changed,
        });

        let mut slots = self.slots();
        if slots.len() >= self.config.max_sessions {
            return Err(SessionError::LimitExceeded(self.config.max_sessions));
        }
        slots.insert(id, slot.clone());
        drop(slots);

        if self.config.time_scale > 0.0 {
            spawn_pump(Arc::downgrade(&slot), self.config.time_scale);
        }
        Ok((slot, snap))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Slot>, SessionError> {
        self.sweep();
        let slot = self.slots().get(id).cloned().ok_or_else(|| SessionError::UnknownSession(id.to_owned()))?;
        slot.touch();
        Ok(slot)
    }
}

/// Advances a session's clock in step with wall time until the session goes away.
fn spawn_pump(slot: std::sync::Weak<Slot>, scale: f64) {
    let Ok(handle) = tokio::runtime::Handle::try_current() else {
        return;
    };
    handle.spawn(async move {
        let mut ticker = tokio::time::interval(PUMP_PERIOD);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let mut carry = 0.0;
        loop {
            ticker.tick().await;
            let Some(slot) = slot.upgrade() else { break };
            if slot.is_closed() {
                break;
            }
            carry += PUMP_PERIOD.as_millis() as f64 * scale;
            let dt = carry.floor() as u64;
            if dt == 0 {
                continue;
            }
            carry -= dt as f64;
            let mut live = slot.live.lock().await;
            if live.host.is_terminal() {
                continue;
            }
            live.host.advance(dt.min(MAX_CLOCK_STEP_MILLIS));
            slot.publish(&mut live);
        }
    });
}
