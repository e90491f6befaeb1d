//! Concurrent PIR client: one outstanding request per server, decode once
//! the quorum has answered.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use dualring_core::pir::{
    cost_model, decode_recursive, encode_query_recursive, CostEstimate, DatabaseHeader, PirError, PirParams,
    QueryShape, ServerResponse,
};
use rand::Rng;

use crate::frame::{read_frame, write_frame, Frame, FrameError, MSG_DB_INFO, MSG_DB_INFO_REQ, MSG_ERROR, MSG_QUERY, MSG_RESPONSE};
use crate::payload::{ErrorPayload, PayloadError, QueryPayload, ResponsePayload};
use crate::server::PirServer;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Pir(#[from] PirError),
    #[error("server replied with error 0x{code:02x}: {message}")]
    Remote { code: u8, message: String },
    #[error("unexpected reply type 0x{0:02x}")]
    UnexpectedReply(u8),
    #[error("connection closed")]
    Closed,
    #[error("server unavailable")]
    Unavailable,
    #[error("servers disagree about the database: {0}")]
    Mismatch(String),
    #[error("only {got} of {needed} required servers answered")]
    QuorumUnreachable { got: usize, needed: usize },
}

/// One request/reply exchange with a server.
pub trait Transport: Send + Sync {
    fn round_trip(&self, request: &Frame) -> Result<Frame, NetError>;
}

/// Calls a [`PirServer`] directly. `kill` makes it unavailable, as if the
/// process had died.
pub struct InProcess {
    server: Arc<PirServer>,
    alive: AtomicBool,
}

impl InProcess {
    pub fn new(server: Arc<PirServer>) -> Self {
        InProcess {
            server,
            alive: AtomicBool::new(true),
        }
    }

    pub fn kill(&self) {
        self.alive.store(false, Ordering::SeqCst);
    }
}

impl Transport for InProcess {
    fn round_trip(&self, request: &Frame) -> Result<Frame, NetError> {
        if !self.alive.load(Ordering::SeqCst) {
            return Err(NetError::Unavailable);
        }
        // the wire form is what gets accounted, so go through it
        let (request, _) = Frame::parse(&request.to_bytes())?;
        let reply = self.server.handle(&request);
        Ok(Frame::parse(&reply.to_bytes())?.0)
    }
}

/// A persistent TCP connection, opened on first use and reopened after an
/// error.
pub struct Tcp {
    addr: SocketAddr,
    timeout: Duration,
    conn: Mutex<Option<(BufReader<TcpStream>, BufWriter<TcpStream>)>>,
}

impl Tcp {
    pub fn new(addr: SocketAddr, timeout: Duration) -> Self {
        Tcp {
            addr,
            timeout,
            conn: Mutex::new(None),
        }
    }

    fn connect(&self) -> io::Result<(BufReader<TcpStream>, BufWriter<TcpStream>)> {
        let s = TcpStream::connect_timeout(&self.addr, self.timeout)?;
        s.set_read_timeout(Some(self.timeout))?;
        s.set_write_timeout(Some(self.timeout))?;
        s.set_nodelay(true)?;
        Ok((BufReader::new(s.try_clone()?), BufWriter::new(s)))
    }
}

impl Transport for Tcp {
    fn round_trip(&self, request: &Frame) -> Result<Frame, NetError> {
        let mut guard = self.conn.lock().unwrap();
        if guard.is_none() {
            *guard = Some(self.connect()?);
        }
        let (reader, writer) = guard.as_mut().unwrap();
        let result = write_frame(writer, request)
            .map_err(NetError::from)
            .and_then(|_| read_frame(reader)?.ok_or(NetError::Closed));
        if result.is_err() {
            *guard = None;
        }
        result
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quorum {
    /// Decode as soon as `d * t + 1` servers have answered.
    Minimum,
    /// Wait for every server.
    All,
}

/// Wall-clock phases and exact payload byte counts of one fetch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FetchStats {
    pub up_bytes: u64,
    pub down_bytes: u64,
    pub encode_s: f64,
    pub server_s: f64,
    pub decode_s: f64,
    pub total_s: f64,
    pub responders: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub records: Vec<Vec<u8>>,
    pub stats: FetchStats,
}

pub struct PirClient {
    transports: Vec<Arc<dyn Transport>>,
    params: PirParams,
    quorum: Quorum,
    timeout: Duration,
    header: Option<DatabaseHeader>,
    baseline_s: f64,
    next_id: u32,
}

impl PirClient {
    pub fn new(transports: Vec<Arc<dyn Transport>>, params: PirParams) -> Result<Self, NetError> {
        if transports.len() != params.servers() {
            return Err(NetError::Mismatch(format!(
                "{} endpoints for {} servers",
                transports.len(),
                params.servers()
            )));
        }
        Ok(PirClient {
            transports,
            params,
            quorum: Quorum::Minimum,
            timeout: DEFAULT_TIMEOUT,
            header: None,
            baseline_s: 0.0,
            next_id: 1,
        })
    }

    pub fn with_quorum(mut self, quorum: Quorum) -> Self {
        self.quorum = quorum;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn params(&self) -> &PirParams {
        &self.params
    }

    /// The database header, fetched on first use from every reachable server.
    pub fn header(&mut self) -> Result<DatabaseHeader, NetError> {
        if let Some(h) = self.header {
            return Ok(h);
        }
        let request = Frame::new(MSG_DB_INFO_REQ, Vec::new());
        let mut agreed: Option<DatabaseHeader> = None;
        let mut best_rtt = f64::INFINITY;
        let mut reachable = 0;
        for t in &self.transports {
            let start = Instant::now();
            let Ok(reply) = t.round_trip(&request) else { continue };
            best_rtt = best_rtt.min(start.elapsed().as_secs_f64());
            let h = match reply.msg_type {
                MSG_DB_INFO => DatabaseHeader::parse(&reply.payload)?,
                other => return Err(reply_error(other, &reply.payload)),
            };
            if agreed.is_some_and(|a| a != h) {
                return Err(NetError::Mismatch("servers hold different databases".into()));
            }
            agreed = Some(h);
            reachable += 1;
        }
        let needed = self.params.required_responses(self.params.depth());
        let h = agreed.ok_or(NetError::QuorumUnreachable { got: 0, needed })?;
        if reachable < needed {
            return Err(NetError::QuorumUnreachable { got: reachable, needed });
        }
        if h.word_bits != self.params.word_bits() {
            return Err(NetError::Mismatch(format!(
                "database uses w={}, client w={}",
                h.word_bits,
                self.params.word_bits()
            )));
        }
        self.header = Some(h);
        self.baseline_s = best_rtt;
        Ok(h)
    }

    pub fn shape(&mut self) -> Result<QueryShape, NetError> {
        let h = self.header()?;
        Ok(QueryShape::recursive(
            h.num_records as usize,
            h.row_words()?,
            self.params.depth(),
        )?)
    }

    /// Predicted payload bytes for fetching `num_ads` records.
    pub fn predicted_cost(&mut self, num_ads: usize) -> Result<CostEstimate, NetError> {
        let shape = self.shape()?;
        Ok(cost_model(&shape, &self.params, num_ads))
    }

    /// Retrieves the records at `betas` in one batched request per server.
    pub fn fetch<R: Rng + ?Sized>(&mut self, betas: &[usize], rng: &mut R) -> Result<FetchResult, NetError> {
        let shape = self.shape()?;
        let header = self.header()?;
        let bits = self.params.word_bits();
        let l = self.params.servers();
        let depth = shape.depth();
        let needed = self.params.required_responses(depth);
        let wait_for = match self.quorum {
            Quorum::Minimum => needed,
            Quorum::All => l,
        };
        let query_id = self.next_id;
        self.next_id = self.next_id.wrapping_add(1);

        let total_start = Instant::now();
        let mut per_server: Vec<Vec<Vec<u32>>> = vec![Vec::with_capacity(betas.len()); l];
        for &beta in betas {
            for share in encode_query_recursive(beta, &shape, &self.params, rng)? {
                per_server[share.server_index].push(share.vector);
            }
        }
        let level_dims: Vec<u32> = shape.level_dims.iter().map(|&d| d as u32).collect();
        let frames: Vec<Frame> = per_server
            .into_iter()
            .map(|shares| {
                let payload = QueryPayload {
                    query_id,
                    level_dims: level_dims.clone(),
                    shares,
                };
                Frame::new(MSG_QUERY, payload.encode(bits))
            })
            .collect();
        let encode_s = total_start.elapsed().as_secs_f64();

        let fan_start = Instant::now();
        let (tx, rx) = mpsc::channel();
        for (i, (t, frame)) in self.transports.iter().zip(frames).enumerate() {
            let t = t.clone();
            let tx = tx.clone();
            thread::spawn(move || {
                let up = frame.payload.len() as u64;
                let _ = tx.send((i, up, t.round_trip(&frame)));
            });
        }
        drop(tx);

        let deadline = fan_start + self.timeout;
        let mut up_bytes = 0u64;
        let mut down_bytes = 0u64;
        let mut replies: Vec<(usize, ResponsePayload)> = Vec::new();
        let mut last_error: Option<NetError> = None;
        while replies.len() < wait_for {
            let left = deadline.saturating_duration_since(Instant::now());
            let Ok((i, up, result)) = rx.recv_timeout(left) else { break };
            let reply = match result {
                Ok(reply) => reply,
                Err(e) => {
                    last_error = Some(e);
                    continue;
                }
            };
            up_bytes += up;
            down_bytes += reply.payload.len() as u64;
            match parse_response(&reply, bits, query_id, betas.len(), header.row_words()?) {
                Ok(r) => replies.push((i, r)),
                Err(e) => last_error = Some(e),
            }
        }
        let server_s = (fan_start.elapsed().as_secs_f64() - self.baseline_s).max(0.0);
        if replies.len() < needed {
            if let Some(e @ NetError::Remote { .. }) = last_error {
                return Err(e);
            }
            return Err(NetError::QuorumUnreachable {
                got: replies.len(),
                needed,
            });
        }

        let decode_start = Instant::now();
        replies.sort_by_key(|(i, _)| *i);
        let record_size = header.record_size as usize;
        let mut records = Vec::with_capacity(betas.len());
        for ad in 0..betas.len() {
            let responses: Vec<ServerResponse> = replies
                .iter()
                .map(|(i, r)| ServerResponse {
                    server_index: *i,
                    vector: r.vectors[ad].clone(),
                })
                .collect();
            records.push(decode_recursive(&responses, &self.params, depth, record_size)?);
        }
        let decode_s = decode_start.elapsed().as_secs_f64();
        Ok(FetchResult {
            records,
            stats: FetchStats {
                up_bytes,
                down_bytes,
                encode_s,
                server_s,
                decode_s,
                total_s: total_start.elapsed().as_secs_f64(),
                responders: replies.len(),
            },
        })
    }
}

fn reply_error(msg_type: u8, payload: &[u8]) -> NetError {
    if msg_type == MSG_ERROR {
        match ErrorPayload::decode(payload) {
            Ok(e) => NetError::Remote {
                code: e.code,
                message: e.message,
            },
            Err(e) => e.into(),
        }
    } else {
        NetError::UnexpectedReply(msg_type)
    }
}

fn parse_response(
    reply: &Frame,
    bits: u32,
    query_id: u32,
    num_ads: usize,
    words: usize,
) -> Result<ResponsePayload, NetError> {
    if reply.msg_type != MSG_RESPONSE {
        return Err(reply_error(reply.msg_type, &reply.payload));
    }
    let r = ResponsePayload::decode(&reply.payload, bits)?;
    if r.query_id != query_id || r.vectors.len() != num_ads || r.words as usize != words {
        return Err(NetError::Mismatch(format!(
            "reply for query {} with {} vectors of {} words",
            r.query_id,
            r.vectors.len(),
            r.words
        )));
    }
    Ok(r)
}

/// In-process transports over one shared database.
pub fn in_process_cluster(server: Arc<PirServer>, l: usize) -> Vec<Arc<InProcess>> {
    (0..l).map(|_| Arc::new(InProcess::new(server.clone()))).collect()
}

pub fn as_transports<T: Transport + 'static>(ts: &[Arc<T>]) -> Vec<Arc<dyn Transport>> {
    ts.iter().map(|t| t.clone() as Arc<dyn Transport>).collect()
}
