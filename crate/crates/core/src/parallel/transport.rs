use std::collections::VecDeque;
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::agent::SubsystemAgent;
use super::message::{CoordinatorMessage, StageControl};
use crate::he::HeError;

/// Coordinator side of the message channel to subsystem workers.
pub trait Transport {
    /// Delivers `msg` to the worker hosting subsystem `msg.sub()`.
    fn send(&mut self, msg: CoordinatorMessage) -> Result<(), HeError>;
    /// Next reply from any worker.
    fn recv(&mut self) -> Result<CoordinatorMessage, HeError>;
}

/// Runs every agent on the caller's thread.
pub struct InlineTransport<'a> {
    agents: Vec<SubsystemAgent<'a>>,
    replies: VecDeque<CoordinatorMessage>,
}

impl<'a> InlineTransport<'a> {
    pub fn new(agents: Vec<SubsystemAgent<'a>>) -> Self {
        Self { agents, replies: VecDeque::new() }
    }

    pub fn into_agents(self) -> Vec<SubsystemAgent<'a>> {
        self.agents
    }
}

impl Transport for InlineTransport<'_> {
    fn send(&mut self, msg: CoordinatorMessage) -> Result<(), HeError> {
        let sub = msg.sub();
        let agent = self.agents.get_mut(sub).ok_or_else(|| HeError::Protocol(format!("no subsystem {sub}")))?;
        self.replies.extend(agent.handle(msg));
        Ok(())
    }

    fn recv(&mut self) -> Result<CoordinatorMessage, HeError> {
        self.replies.pop_front().ok_or_else(|| HeError::Protocol("reply expected but none pending".into()))
    }
}

/// Channels to worker threads; each worker hosts one or more agents.
pub struct ThreadedTransport {
    routes: Vec<Sender<CoordinatorMessage>>,
    replies: Receiver<CoordinatorMessage>,
    timeout: Duration,
}

impl ThreadedTransport {
    /// `routes[s]` reaches the worker hosting subsystem `s`.
    pub fn new(routes: Vec<Sender<CoordinatorMessage>>, replies: Receiver<CoordinatorMessage>, timeout: Duration) -> Self {
        Self { routes, replies, timeout }
    }
}

impl Transport for ThreadedTransport {
    fn send(&mut self, msg: CoordinatorMessage) -> Result<(), HeError> {
        let sub = msg.sub();
        let route = self.routes.get(sub).ok_or_else(|| HeError::Protocol(format!("no subsystem {sub}")))?;
        route.send(msg).map_err(|_| HeError::Protocol(format!("worker for subsystem {sub} is gone")))
    }

    fn recv(&mut self) -> Result<CoordinatorMessage, HeError> {
        self.replies.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => HeError::Protocol(format!("no worker reply within {:?}", self.timeout)),
            RecvTimeoutError::Disconnected => HeError::Protocol("all workers are gone".into()),
        })
    }
}

/// Worker thread body: dispatches messages to its agents until each has been told to finish.
pub fn worker_loop<'a>(
    mut agents: Vec<SubsystemAgent<'a>>,
    inbox: Receiver<CoordinatorMessage>,
    outbox: Sender<CoordinatorMessage>,
) -> Vec<SubsystemAgent<'a>> {
    let mut open = agents.len();
    while open > 0 {
        let Ok(msg) = inbox.recv() else { break };
        if matches!(msg, CoordinatorMessage::StageControl { control: StageControl::Finish, .. }) {
            open -= 1;
            continue;
        }
        let sub = msg.sub();
        let replies = match agents.iter_mut().find(|a| a.sub() == sub) {
            Some(a) => a.handle(msg),
            None => vec![CoordinatorMessage::Failure { sub, error: HeError::Protocol(format!("subsystem {sub} not hosted here")) }],
        };
        for r in replies {
            if outbox.send(r).is_err() {
                return agents;
            }
        }
    }
    agents
}
