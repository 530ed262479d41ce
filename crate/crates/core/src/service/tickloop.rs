//! The thread that owns the [`Simulation`] and the handle request handlers use
//! to talk to it.
//!
//! Handlers never touch simulation state. Commands travel through a queue and
//! are applied at the next tick boundary; frames come back through a broadcast
//! channel. A subscriber that falls more than `frame_buffer` frames behind is
//! cut off instead of slowing the loop down.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot};

use super::driver::DriverLock;
use crate::daps::{RegistryError, SampleStore};
use crate::kinematics::TraceRow;
use crate::protocol::{CommandMessage, TelemetryFrame};
use crate::sim::{check_command, SimError, Simulation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    #[error("{0}")]
    Malformed(String),
    #[error("not the driver: claim the driver token first")]
    NotDriver,
    #[error(transparent)]
    Range(#[from] RegistryError),
    #[error("simulation halted: {0}")]
    Halted(String),
}

/// How ticks are triggered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// One tick every `tick_ms` of wall-clock time.
    RealTime,
    /// Only when [`ControlHandle::step`] asks; used for scripted, reproducible runs.
    Manual,
}

pub struct LoopOptions {
    pub pacing: Pacing,
    /// Receives the CSV trace, header first.
    pub trace: Option<Box<dyn Write + Send>>,
    pub frame_buffer: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self { pacing: Pacing::RealTime, trace: None, frame_buffer: 256 }
    }
}

struct Envelope {
    cmd: CommandMessage,
    reply: oneshot::Sender<Result<u64, ServiceError>>,
}

enum Control {
    Step(u64, oneshot::Sender<u64>),
    Stop,
}

/// Cloneable access to a running tick loop.
#[derive(Clone)]
pub struct ControlHandle {
    commands: mpsc::UnboundedSender<Envelope>,
    control: mpsc::UnboundedSender<Control>,
    frames: broadcast::Sender<Arc<TelemetryFrame>>,
    driver: Arc<DriverLock>,
    store: SampleStore,
    tick_ms: u64,
    queued: Arc<AtomicUsize>,
    halted: Arc<Mutex<Option<String>>>,
}

impl ControlHandle {
    pub fn driver(&self) -> &Arc<DriverLock> {
        &self.driver
    }

    pub fn store(&self) -> &SampleStore {
        &self.store
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    /// Commands accepted but not yet applied.
    pub fn queued(&self) -> usize {
        self.queued.load(Ordering::SeqCst)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<TelemetryFrame>> {
        self.frames.subscribe()
    }

    fn halted_error(&self) -> ServiceError {
        let reason = self.halted.lock().expect("halt flag poisoned").clone();
        ServiceError::Halted(reason.unwrap_or_else(|| "tick loop stopped".into()))
    }

    /// Validates and queues a command. The receiver resolves to the tick at
    /// which it was applied.
    pub fn enqueue(
        &self,
        cmd: CommandMessage,
        token: Option<&str>,
    ) -> Result<oneshot::Receiver<Result<u64, ServiceError>>, ServiceError> {
        if cmd.needs_driver() && !self.driver.is_driver(token) {
            return Err(ServiceError::NotDriver);
        }
        check_command(&cmd)?;
        let (tx, rx) = oneshot::channel();
        self.queued.fetch_add(1, Ordering::SeqCst);
        if self.commands.send(Envelope { cmd, reply: tx }).is_err() {
            self.queued.fetch_sub(1, Ordering::SeqCst);
            return Err(self.halted_error());
        }
        Ok(rx)
    }

    pub async fn submit(&self, cmd: CommandMessage, token: Option<&str>) -> Result<u64, ServiceError> {
        let rx = self.enqueue(cmd, token)?;
        match rx.await {
            Ok(result) => result,
            Err(_) => Err(self.halted_error()),
        }
    }

    /// Runs `n` ticks of a manually paced loop; resolves to the next tick index.
    pub async fn step(&self, n: u64) -> Result<u64, ServiceError> {
        let (tx, rx) = oneshot::channel();
        self.control.send(Control::Step(n, tx)).map_err(|_| self.halted_error())?;
        rx.await.map_err(|_| self.halted_error())
    }
}

/// A running tick loop.
pub struct ControlService {
    handle: ControlHandle,
    thread: JoinHandle<Result<Simulation, SimError>>,
}

impl ControlService {
    pub fn start(sim: Simulation, options: LoopOptions) -> Self {
        let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
        let (ctl_tx, ctl_rx) = mpsc::unbounded_channel();
        let (frames, _) = broadcast::channel(options.frame_buffer.max(1));
        let handle = ControlHandle {
            commands: cmd_tx,
            control: ctl_tx,
            frames: frames.clone(),
            driver: Arc::new(DriverLock::new()),
            store: sim.store().clone(),
            tick_ms: sim.tick_ms(),
            queued: Arc::new(AtomicUsize::new(0)),
            halted: Arc::new(Mutex::new(None)),
        };
        let runner = Runner {
            sim,
            commands: cmd_rx,
            control: ctl_rx,
            frames,
            trace: options.trace,
            queued: handle.queued.clone(),
            halted: handle.halted.clone(),
        };
        let pacing = options.pacing;
        let thread = std::thread::Builder::new()
            .name("tick-loop".into())
            .spawn(move || runner.run(pacing))
            .expect("spawn tick loop");
        Self { handle, thread }
    }

    pub fn handle(&self) -> ControlHandle {
        self.handle.clone()
    }

    /// Stops the loop and hands back the simulation.
    pub fn shutdown(self) -> Result<Simulation, SimError> {
        let _ = self.handle.control.send(Control::Stop);
        self.thread.join().expect("tick loop panicked")
    }
}

fn halt(flag: &Mutex<Option<String>>, err: SimError) -> SimError {
    *flag.lock().expect("halt flag poisoned") = Some(err.to_string());
    err
}

struct Runner {
    sim: Simulation,
    commands: mpsc::UnboundedReceiver<Envelope>,
    control: mpsc::UnboundedReceiver<Control>,
    frames: broadcast::Sender<Arc<TelemetryFrame>>,
    trace: Option<Box<dyn Write + Send>>,
    queued: Arc<AtomicUsize>,
    halted: Arc<Mutex<Option<String>>>,
}

impl Runner {
    fn run(mut self, pacing: Pacing) -> Result<Simulation, SimError> {
        if let Some(t) = self.trace.as_mut() {
            if let Err(e) = writeln!(t, "{}", TraceRow::HEADER) {
                return Err(halt(&self.halted, SimError::Store(e.into())));
            }
        }
        let result = match pacing {
            Pacing::RealTime => self.run_realtime(),
            Pacing::Manual => self.run_manual(),
        };
        if let Some(t) = self.trace.as_mut() {
            let _ = t.flush();
        }
        result.map(|_| self.sim)
    }


    fn run_realtime(&mut self) -> Result<(), SimError> {
        let period = Duration::from_millis(self.sim.tick_ms());
        let start = Instant::now();
        let mut n: u32 = 0;
        loop {
            match self.control.try_recv() {
                Ok(Control::Stop) | Err(mpsc::error::TryRecvError::Disconnected) => return Ok(()),
                Ok(Control::Step(_, done)) => {
                    let _ = done.send(self.sim.next_tick());
                }
                Err(mpsc::error::TryRecvError::Empty) => {}
            }
            let deadline = start + period * n;
            let now = Instant::now();
            if deadline > now {
                std::thread::sleep(deadline - now);
            }
            self.tick_once()?;
            n += 1;
        }
    }

    fn run_manual(&mut self) -> Result<(), SimError> {
        while let Some(ctl) = self.control.blocking_recv() {
            match ctl {
                Control::Stop => return Ok(()),
                Control::Step(n, done) => {
                    for _ in 0..n {
                        self.tick_once()?;
                    }
                    let _ = done.send(self.sim.next_tick());
                }
            }
        }
        Ok(())
    }

    fn tick_once(&mut self) -> Result<(), SimError> {
        let mut batch = Vec::new();
        while let Ok(env) = self.commands.try_recv() {
            batch.push(env);
        }
        let cmds: Vec<CommandMessage> = batch.iter().map(|e| e.cmd).collect();
        let out = match self.sim.tick(&cmds) {
            Ok(out) => out,
            Err(e) => {
                let msg = e.to_string();
                for env in batch {
                    let _ = env.reply.send(Err(ServiceError::Halted(msg.clone())));
                }
                return Err(halt(&self.halted, e));
            }
        };
        if let Some(t) = self.trace.as_mut() {
            if let Err(e) = writeln!(t, "{}", out.trace.to_csv()) {
                let err = halt(&self.halted, SimError::Store(e.into()));
                for env in batch {
                    let _ = env.reply.send(Err(ServiceError::Halted(err.to_string())));
                }
                return Err(err);
            }
        }
        let tick = out.frame.tick;
        // no receivers is fine
        let _ = self.frames.send(Arc::new(out.frame));
        self.queued.fetch_sub(batch.len(), Ordering::SeqCst);
        for env in batch {
            let _ = env.reply.send(Ok(tick));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daps::Durability;
    use crate::kinematics::DriveCommand;
    use crate::sim::SimConfig;

    fn service(pacing: Pacing) -> (ControlService, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        let sim = Simulation::new(SimConfig::default(), store).unwrap();
        (ControlService::start(sim, LoopOptions { pacing, ..LoopOptions::default() }), dir)
    }

    #[tokio::test]
    async fn manual_ack_matches_frame() {
        let (svc, _d) = service(Pacing::Manual);
        let h = svc.handle();
        let token = h.driver().claim().unwrap();
        let mut frames = h.subscribe();
        h.step(3).await.unwrap();
        for _ in 0..3 {
            assert_eq!(frames.recv().await.unwrap().drive_state, DriveCommand::Stop);
        }
        let pending = h.enqueue(CommandMessage::Drive(DriveCommand::TurnLeft), Some(&token)).unwrap();
        assert_eq!(h.queued(), 1);
        h.step(1).await.unwrap();
        let applied = pending.await.unwrap().unwrap();
        assert_eq!(applied, 3);
        let f = frames.recv().await.unwrap();
        assert_eq!((f.tick, f.drive_state), (3, DriveCommand::TurnLeft));
        assert_eq!(h.queued(), 0);
        svc.shutdown().unwrap();
    }

    #[tokio::test]
    async fn authorization_and_range() {
        let (svc, _d) = service(Pacing::Manual);
        let h = svc.handle();
        let drive = CommandMessage::Drive(DriveCommand::Forward);
        assert_eq!(h.enqueue(drive, None).unwrap_err(), ServiceError::NotDriver);
        assert_eq!(h.enqueue(drive, Some("guess")).unwrap_err(), ServiceError::NotDriver);
        let token = h.driver().claim().unwrap();
        let bad = CommandMessage::ActuatorSet { channel: 9, value: 0 };
        assert!(matches!(h.enqueue(bad, Some(&token)), Err(ServiceError::Range(_))));
        // viewers may subscribe and reset without the token
        assert!(h.enqueue(CommandMessage::Subscribe, None).is_ok());
        svc.shutdown().unwrap();
    }

    #[tokio::test]
    async fn realtime_loop_applies_commands() {
        let (svc, _d) = service(Pacing::RealTime);
        let h = svc.handle();
        let token = h.driver().claim().unwrap();
        let a = h.submit(CommandMessage::Drive(DriveCommand::Stop), Some(&token)).await.unwrap();
        let b = h.submit(CommandMessage::Drive(DriveCommand::Stop), Some(&token)).await.unwrap();
        assert!(b >= a);
        let sim = svc.shutdown().unwrap();
        assert!(sim.next_tick() > a);
        assert!(h.submit(CommandMessage::TripReset, None).await.is_err());
    }

    #[tokio::test]
    async fn slow_subscriber_is_cut_off() {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        let sim = Simulation::new(SimConfig::default(), store).unwrap();
        let svc = ControlService::start(sim, LoopOptions { pacing: Pacing::Manual, trace: None, frame_buffer: 4 });
        let h = svc.handle();
        let mut rx = h.subscribe();
        h.step(10).await.unwrap();
        assert!(matches!(rx.recv().await, Err(broadcast::error::RecvError::Lagged(_))));
        svc.shutdown().unwrap();
    }
}
