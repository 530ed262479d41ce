//! Single-driver token: at most one session may steer the robot.

use std::sync::{Arc, Mutex};

use rand::Rng;

#[derive(Debug, Default)]
pub struct DriverLock {
    holder: Mutex<Option<String>>,
}

impl DriverLock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Issues a fresh token if nobody holds one.
    pub fn claim(&self) -> Option<String> {
        let mut holder = self.holder.lock().expect("driver lock poisoned");
        if holder.is_some() {
            return None;
        }
        let token = format!("{:032x}", rand::rng().random::<u128>());
        *holder = Some(token.clone());
        Some(token)
    }

    /// Gives the token back. Returns false if `token` was not the driver's.
    pub fn release(&self, token: &str) -> bool {
        let mut holder = self.holder.lock().expect("driver lock poisoned");
        if holder.as_deref() == Some(token) {
            *holder = None;
            true
        } else {
            false
        }
    }

    pub fn is_driver(&self, token: Option<&str>) -> bool {
        token.is_some() && self.holder.lock().expect("driver lock poisoned").as_deref() == token
    }

    pub fn is_held(&self) -> bool {
        self.holder.lock().expect("driver lock poisoned").is_some()
    }
}

/// Releases the token when dropped, tying it to a connection's lifetime.
#[derive(Debug)]
pub struct DriverGuard {
    lock: Arc<DriverLock>,
    token: String,
}

impl DriverGuard {
    pub fn new(lock: Arc<DriverLock>, token: String) -> Self {
        Self { lock, token }
    }
}

impl Drop for DriverGuard {
    fn drop(&mut self) {
        self.lock.release(&self.token);
    }
}
