//! Loopback transport: frames are encoded, decoded and handled by a
//! `Server` living in the same process.

use std::collections::VecDeque;
use std::io;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::frame::Frame;
use super::link::{FrameIo, Links};
use super::message::{ErrorCode, Message, WireError};
use super::TransportError;
use crate::server::Server;

pub struct InProcLink {
    server: Arc<Mutex<Server>>,
    pending: VecDeque<(Instant, Frame)>,
}

impl InProcLink {
    pub fn new(server: Arc<Mutex<Server>>) -> Self {
        Self { server, pending: VecDeque::new() }
    }

    pub fn server(&self) -> Arc<Mutex<Server>> {
        Arc::clone(&self.server)
    }
}

impl FrameIo for InProcLink {
    fn send_frame(&mut self, frame: &Frame) -> io::Result<()> {
        let sent = Instant::now();
        // Round trip through the byte encoding, as a socket would.
        let (frame, _) = Frame::parse(&frame.to_bytes())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let mut server = self.server.lock().expect("server mutex poisoned");
        let replies = match Message::decode(frame.msg_type, &frame.payload) {
            Ok(msg) => server.handle(msg),
            Err(WireError::UnknownType(_)) => vec![Message::Error { code: ErrorCode::UnknownType as u16 }],
            Err(_) => vec![Message::Error { code: ErrorCode::Malformed as u16 }],
        };
        let ready = sent + 2 * Duration::from_millis(u64::from(server.latency_ms()));
        for m in replies {
            self.pending.push_back((ready, Frame { msg_type: m.msg_type(), payload: m.encode_payload() }));
        }
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<Option<Frame>, TransportError> {
        let (ready, frame) = self.pending.pop_front().ok_or(TransportError::NothingPending)?;
        let now = Instant::now();
        if ready > now {
            std::thread::sleep(ready - now);
        }
        Ok(Some(frame))
    }
}

/// Two fresh in-process servers with the given shuffle seeds.
pub fn server_pair(seeds: [u64; 2]) -> [Arc<Mutex<Server>>; 2] {
    [Arc::new(Mutex::new(Server::new(0, seeds[0]))), Arc::new(Mutex::new(Server::new(1, seeds[1])))]
}

/// Client links to a fresh in-process server pair, plus handles to the servers.
pub fn inproc_links(seeds: [u64; 2]) -> (Links, [Arc<Mutex<Server>>; 2]) {
    let servers = server_pair(seeds);
    let links = Links::new(
        Box::new(InProcLink::new(Arc::clone(&servers[0]))),
        Box::new(InProcLink::new(Arc::clone(&servers[1]))),
    );
    (links, servers)
}
