use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;

struct Slot<T> {
    value: Arc<Mutex<T>>,
    last_used: Instant,
}

/// In-memory sessions keyed by id. The map lock is held only for lookups;
/// each session has its own lock, so work on one session never blocks another.
pub struct SessionStore<T> {
    slots: Mutex<HashMap<String, Slot<T>>>,
    idle: Duration,
}

impl<T> SessionStore<T> {
    pub fn new(idle: Duration) -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
            idle,
        }
    }

    pub fn idle_timeout(&self) -> Duration {
        self.idle
    }

    pub fn insert(&self, id: String, value: T) -> Arc<Mutex<T>> {
        self.insert_at(id, value, Instant::now())
    }

    pub fn insert_at(&self, id: String, value: T, now: Instant) -> Arc<Mutex<T>> {
        let value = Arc::new(Mutex::new(value));
        self.slots.lock().insert(
            id,
            Slot {
                value: value.clone(),
                last_used: now,
            },
        );
        value
    }

    /// Looks up a live session and refreshes its idle clock.
    pub fn get(&self, id: &str) -> Option<Arc<Mutex<T>>> {
        self.get_at(id, Instant::now())
    }

    pub fn get_at(&self, id: &str, now: Instant) -> Option<Arc<Mutex<T>>> {
        let mut slots = self.slots.lock();
        let expired = now.saturating_duration_since(slots.get(id)?.last_used) >= self.idle;
        if expired {
            slots.remove(id);
            return None;
        }
        let slot = slots.get_mut(id)?;
        slot.last_used = now;
        Some(slot.value.clone())
    }

    /// Drops sessions idle for at least the timeout; returns how many.
    pub fn evict_idle(&self) -> usize {
        self.evict_idle_at(Instant::now())
    }

    pub fn evict_idle_at(&self, now: Instant) -> usize {
        let mut slots = self.slots.lock();
        let before = slots.len();
        slots.retain(|_, s| now.saturating_duration_since(s.last_used) < self.idle);
        before - slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_sessions_expire() {
        let store = SessionStore::new(Duration::from_secs(60));
        let t0 = Instant::now();
        store.insert_at("a".into(), 1, t0);
        store.insert_at("b".into(), 2, t0);
        // touching a keeps it alive
        assert!(store.get_at("a", t0 + Duration::from_secs(50)).is_some());
        assert_eq!(store.evict_idle_at(t0 + Duration::from_secs(70)), 1);
        assert!(store.get_at("b", t0 + Duration::from_secs(70)).is_none());
        assert_eq!(
            *store
                .get_at("a", t0 + Duration::from_secs(100))
                .unwrap()
                .lock(),
            1
        );
        assert!(store.get_at("a", t0 + Duration::from_secs(200)).is_none());
        assert!(store.is_empty());
    }

    #[test]
    fn sessions_share_state_through_handles() {
        let store = SessionStore::new(Duration::from_secs(60));
        let h = store.insert("s".into(), Vec::<u32>::new());
        h.lock().push(7);
        assert_eq!(*store.get("s").unwrap().lock(), vec![7]);
        assert_eq!(store.len(), 1);
    }
}
