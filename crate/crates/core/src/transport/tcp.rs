//! TCP transport: a blocking client link and a single-session server loop
//! with optional one-way delay on each direction.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::frame::{read_frame, write_frame, Frame};
use super::link::FrameIo;
use super::message::{ErrorCode, Message, WireError};
use super::TransportError;
use crate::server::Server;

pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpLink {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }
}

impl FrameIo for TcpLink {
    fn send_frame(&mut self, frame: &Frame) -> io::Result<()> {
        write_frame(&mut self.writer, frame)
    }

    fn recv_frame(&mut self) -> Result<Option<Frame>, TransportError> {
        self.writer.flush()?;
        Ok(read_frame(&mut self.reader)?)
    }
}

fn error_frame(code: ErrorCode) -> Frame {
    let m = Message::Error { code: code as u16 };
    Frame { msg_type: m.msg_type(), payload: m.encode_payload() }
}

fn sleep_until(t: Instant) {
    let now = Instant::now();
    if t > now {
        thread::sleep(t - now);
    }
}

/// Accepts clients forever, serving one session at a time. A client that
/// connects while another session is live receives a busy error and is
/// disconnected. Each session starts from `make_server()`.
pub fn serve<F>(listener: TcpListener, make_server: F) -> io::Result<()>
where
    F: Fn() -> Server + Send + Sync + 'static,
{
    let busy = Arc::new(AtomicBool::new(false));
    let make_server = Arc::new(make_server);
    for stream in listener.incoming() {
        let mut stream = match stream {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::ConnectionAborted => continue,
            Err(e) => return Err(e),
        };
        if busy.swap(true, Ordering::SeqCst) {
            let _ = write_frame(&mut stream, &error_frame(ErrorCode::Busy));
            let _ = stream.flush();
            continue;
        }
        let busy = Arc::clone(&busy);
        let make_server = Arc::clone(&make_server);
        thread::spawn(move || {
            let _ = run_session(stream, make_server());
            busy.store(false, Ordering::SeqCst);
        });
    }
    Ok(())
}

/// Binds to `addr` and serves on a background thread, returning the bound address.
pub fn spawn_server<F>(addr: &str, make_server: F) -> io::Result<std::net::SocketAddr>
where
    F: Fn() -> Server + Send + Sync + 'static,
{
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::spawn(move || serve(listener, make_server));
    Ok(local)
}

fn run_session(stream: TcpStream, mut server: Server) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let (in_tx, in_rx) = mpsc::channel::<(Instant, Frame)>();
    let (out_tx, out_rx) = mpsc::channel::<(Instant, Duration, Vec<Frame>)>();

    let mut reader = BufReader::new(stream.try_clone()?);
    let reader_thread = thread::spawn(move || {
        while let Ok(Some(frame)) = read_frame(&mut reader) {
            if in_tx.send((Instant::now(), frame)).is_err() {
                break;
            }
        }
    });

    let mut writer = BufWriter::new(stream.try_clone()?);
    let writer_thread = thread::spawn(move || -> io::Result<()> {
        for (sent, delay, frames) in out_rx {
            sleep_until(sent + delay);
            for f in &frames {
                write_frame(&mut writer, f)?;
            }
            writer.flush()?;
        }
        Ok(())
    });

    for (arrived, frame) in in_rx {
        let delay = Duration::from_millis(u64::from(server.latency_ms()));
        sleep_until(arrived + delay);
        let replies = match Message::decode(frame.msg_type, &frame.payload) {
            Ok(msg) => server.handle(msg),
            Err(WireError::UnknownType(_)) => vec![Message::Error { code: ErrorCode::UnknownType as u16 }],
            Err(_) => vec![Message::Error { code: ErrorCode::Malformed as u16 }],
        };
        if replies.is_empty() {
            continue;
        }
        let delay = Duration::from_millis(u64::from(server.latency_ms()));
        let frames = replies
            .into_iter()
            .map(|m| Frame { msg_type: m.msg_type(), payload: m.encode_payload() })
            .collect();
        if out_tx.send((Instant::now(), delay, frames)).is_err() {
            break;
        }
    }
    drop(out_tx);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    let _ = reader_thread.join();
    writer_thread.join().unwrap_or(Ok(()))
}
