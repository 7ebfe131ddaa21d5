//! TCP plan service: the rule engine behind the line protocol.
//!
//! One thread per connection; every connection shares the same read-only
//! rule set. Frames on a connection are answered strictly in arrival order.

use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::protocol::{
    decode, encode, read_frame, salvage_request_id, Message, Outcome, PlanResponse, ERR_MALFORMED, ERR_UNEXPECTED,
};
use crate::rules::{evaluate, RuleSet};

/// Answers one frame. Never fails: undecodable input becomes an error frame.
pub fn handle_frame(rules: &RuleSet, frame: &[u8]) -> Vec<u8> {
    let response = match decode(frame) {
        Ok(Message::Request(req)) => PlanResponse {
            request_id: req.request_id,
            outcome: match evaluate(rules, &req.fact) {
                Ok(plan) => Outcome::Plan(plan),
                Err(_) => Outcome::NoMatch,
            },
        },
        Ok(Message::Response(resp)) => PlanResponse {
            request_id: resp.request_id,
            outcome: Outcome::Error {
                code: ERR_UNEXPECTED.into(),
                message: "the planner only accepts plan_request".into(),
            },
        },
        Err(e) => PlanResponse {
            request_id: salvage_request_id(frame),
            outcome: Outcome::Error {
                code: ERR_MALFORMED.into(),
                message: e.to_string(),
            },
        },
    };
    encode(&Message::Response(response))
}

fn serve_connection(rules: &RuleSet, stream: TcpStream) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    while let Some(frame) = read_frame(&mut reader)? {
        if frame.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        writer.write_all(&handle_frame(rules, &frame))?;
        writer.flush()?;
    }
    Ok(())
}

/// A running plan service.
pub struct PlanServer {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl PlanServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Blocks until the acceptor exits (i.e. forever, unless shut down from
    /// another handle).
    pub fn wait(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting connections. Connections already open are served
    /// until their clients hang up.
    pub fn shutdown(mut self) {
        self.stop_acceptor();
    }

    fn stop_acceptor(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept()
        let _ = TcpStream::connect(self.local_addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for PlanServer {
    fn drop(&mut self) {
        if self.acceptor.is_some() {
            self.stop_acceptor();
        }
    }
}

/// Binds `addr` and starts serving `rules` on a background thread.
pub fn serve(rules: RuleSet, addr: impl ToSocketAddrs) -> io::Result<PlanServer> {
    let listener = TcpListener::bind(addr)?;
    let local_addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let rules = Arc::new(rules);

    let acceptor = {
        let stop = Arc::clone(&stop);
        thread::Builder::new().name("planner-accept".into()).spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let rules = Arc::clone(&rules);
                let _ = thread::Builder::new().name("planner-conn".into()).spawn(move || {
                    let _ = serve_connection(&rules, stream);
                });
            }
        })?
    };

    Ok(PlanServer {
        local_addr,
        stop,
        acceptor: Some(acceptor),
    })
}
