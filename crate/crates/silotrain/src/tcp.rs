//! Framed TCP: the wire format from the core crate over real sockets, plus
//! the coordinator server loop and the trainer-side round driver.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use silotrain_core::frame::{Frame, FrameError, Message, HEADER_LEN, MAX_FRAME};
use silotrain_core::protocol::{Coordinator, DecisionRecord, ProtocolError, Trainer, Watchdog};
use silotrain_core::nn::train::EpochRecord;

pub const DEFAULT_PORT: u16 = 7717;

#[derive(Debug, thiserror::Error)]
pub enum TcpError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("frame: {0}")]
    Frame(#[from] FrameError),
    #[error("connection closed mid-frame")]
    TruncatedFrame,
    #[error("peer answered {got} where {wanted} was expected")]
    UnexpectedReply { wanted: &'static str, got: String },
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
}

pub fn write_frame(writer: &mut impl Write, frame: &Frame) -> Result<(), TcpError> {
    writer.write_all(&frame.encode()?)?;
    writer.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between frames;
/// closing inside a frame is an error.
pub fn read_frame(reader: &mut impl Read) -> Result<Option<Frame>, TcpError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        let n = reader.read(&mut header[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(TcpError::TruncatedFrame);
        }
        filled += n;
    }
    let length = u32::from_be_bytes(header) as usize;
    if length == 0 || length > MAX_FRAME {
        return Err(TcpError::Frame(FrameError::TooLarge(length)));
    }
    let mut buf = vec![0u8; HEADER_LEN + length];
    buf[..HEADER_LEN].copy_from_slice(&header);
    reader
        .read_exact(&mut buf[HEADER_LEN..])
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => TcpError::TruncatedFrame,
            _ => TcpError::Io(e),
        })?;
    match Frame::decode(&buf)? {
        Some((frame, _)) => Ok(Some(frame)),
        None => Err(TcpError::TruncatedFrame),
    }
}

pub fn send_message(stream: &mut TcpStream, message: &Message) -> Result<(), TcpError> {
    write_frame(stream, &message.to_frame()?)
}

pub fn read_message(stream: &mut TcpStream) -> Result<Option<Message>, TcpError> {
    match read_frame(stream)? {
        Some(frame) => Ok(Some(Message::from_frame(&frame)?)),
        None => Ok(None),
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ServeStats {
    pub connections: u64,
    pub fetches: u64,
    pub candidates: u64,
}

/// Serves fetches and candidate evaluations until `stop` flips. One thread
/// per connection; the acceptance gate itself is serialized by the lock.
pub fn serve_coordinator(
    listener: TcpListener,
    coordinator: Arc<Mutex<Coordinator>>,
    stop: Arc<AtomicBool>,
    mut on_decision: impl FnMut(&DecisionRecord) + Send,
) -> io::Result<ServeStats> {
    listener.set_nonblocking(true)?;
    let stats = Arc::new(Mutex::new(ServeStats::default()));
    let decisions: Arc<Mutex<Vec<DecisionRecord>>> = Arc::new(Mutex::new(Vec::new()));
    let mut handles = Vec::new();

    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let coordinator = Arc::clone(&coordinator);
                let stats = Arc::clone(&stats);
                let decisions = Arc::clone(&decisions);
                stats.lock().unwrap().connections += 1;
                handles.push(std::thread::spawn(move || {
                    let _ = serve_connection(stream, &coordinator, &stats, &decisions);
                }));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                // Flush decision records while idle so the callback runs on
                // this thread.
                for record in decisions.lock().unwrap().drain(..) {
                    on_decision(&record);
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(e),
        }
    }
    for handle in handles {
        let _ = handle.join();
    }
    for record in decisions.lock().unwrap().drain(..) {
        on_decision(&record);
    }
    let final_stats = *stats.lock().unwrap();
    Ok(final_stats)
}

fn serve_connection(
    mut stream: TcpStream,
    coordinator: &Mutex<Coordinator>,
    stats: &Mutex<ServeStats>,
    decisions: &Mutex<Vec<DecisionRecord>>,
) -> Result<(), TcpError> {
    stream.set_nodelay(true)?;
    loop {
        let Some(message) = read_message(&mut stream)? else {
            return Ok(());
        };
        let reply = match message {
            Message::FetchModel { .. } => {
                stats.lock().unwrap().fetches += 1;
                coordinator.lock().unwrap().handle_fetch()
            }
            Message::CandidateModel { node_id, envelope } => {
                stats.lock().unwrap().candidates += 1;
                let mut guard = coordinator.lock().unwrap();
                let decision = guard.evaluate_candidate(&node_id, &envelope);
                if let Some(record) = guard.decision_log().last() {
                    decisions.lock().unwrap().push(record.clone());
                }
                decision
            }
            // A server never receives its own reply types; drop the line.
            Message::CurrentModel(_) | Message::Decision { .. } => return Ok(()),
        };
        send_message(&mut stream, &reply)?;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNote {
    pub epoch_index: usize,
    pub accepted: bool,
    pub version: u64,
}

#[derive(Debug)]
pub struct NodeRoundOutcome {
    pub history: Vec<EpochRecord>,
    pub candidates_sent: u64,
    pub decisions: Vec<DecisionNote>,
}

/// One trainer round against a live coordinator: fetch over TCP, train,
/// forward each improvement through the watchdog, collect decisions. IO
/// trouble on a candidate skips that candidate, never the training.
pub fn run_node_round(
    addr: impl ToSocketAddrs,
    trainer: &mut Trainer,
    watchdog: &mut Watchdog,
) -> Result<NodeRoundOutcome, TcpError> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    send_message(
        &mut stream,
        &Message::FetchModel {
            node_id: trainer.node_id().to_string(),
        },
    )?;
    let signed = match read_message(&mut stream)? {
        Some(Message::CurrentModel(signed)) => signed,
        Some(other) => {
            return Err(TcpError::UnexpectedReply {
                wanted: "CurrentModel",
                got: other.kind().to_string(),
            })
        }
        None => return Err(TcpError::TruncatedFrame),
    };

    let mut candidates_sent = 0;
    let mut decisions = Vec::new();
    let history = trainer.run_round(&signed, |event| {
        let Some(message) = watchdog.forward(&event) else {
            return;
        };
        if send_message(&mut stream, &message).is_err() {
            return;
        }
        candidates_sent += 1;
        if let Ok(Some(Message::Decision { accepted, version })) = read_message(&mut stream) {
            decisions.push(DecisionNote {
                epoch_index: event.epoch_index,
                accepted,
                version,
            });
        }
    })?;
    Ok(NodeRoundOutcome {
        history,
        candidates_sent,
        decisions,
    })
}
