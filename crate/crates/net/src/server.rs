//! PIR server: a frame handler over a shared database, usable in process or
//! behind a TCP listener with one thread per connection.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use dualring_core::pir::{server_compute_levels, DatabaseMatrix, PirError, QueryShape, QueryShare};

use crate::frame::{
    read_frame, write_frame, Frame, FrameError, MSG_DB_INFO, MSG_DB_INFO_REQ, MSG_ERROR, MSG_QUERY, MSG_RESPONSE,
};
use crate::payload::{ErrorCode, ErrorPayload, QueryPayload, ResponsePayload};

pub struct PirServer {
    db: Arc<DatabaseMatrix>,
}

fn error_frame(code: ErrorCode, message: impl Into<String>) -> Frame {
    Frame::new(MSG_ERROR, ErrorPayload::new(code, message).encode())
}

impl PirServer {
    pub fn new(db: Arc<DatabaseMatrix>) -> Self {
        PirServer { db }
    }

    pub fn database(&self) -> &Arc<DatabaseMatrix> {
        &self.db
    }

    /// Answers one request frame. Never fails: problems become ERROR frames.
    pub fn handle(&self, request: &Frame) -> Frame {
        match request.msg_type {
            MSG_DB_INFO_REQ => Frame::new(MSG_DB_INFO, self.db.header().to_bytes().to_vec()),
            MSG_QUERY => self.answer(&request.payload),
            other => error_frame(ErrorCode::UnknownType, format!("unexpected message type 0x{other:02x}")),
        }
    }

    fn answer(&self, payload: &[u8]) -> Frame {
        let bits = self.db.word_bits();
        let query = match QueryPayload::decode(payload, bits) {
            Ok(q) => q,
            Err(e) => return error_frame(ErrorCode::Malformed, e.to_string()),
        };
        let shape = QueryShape {
            level_dims: query.level_dims.iter().map(|&d| d as usize).collect(),
            num_rows: self.db.rows(),
            row_words: self.db.row_words(),
        };
        let mut vectors = Vec::with_capacity(query.shares.len());
        for share in query.shares {
            let share = QueryShare {
                server_index: 0,
                vector: share,
            };
            match server_compute_levels(&share, &shape, &self.db) {
                Ok(r) => vectors.push(r.vector),
                Err(PirError::ShapeMismatch(m)) => return error_frame(ErrorCode::ShapeMismatch, m),
                Err(e) => return error_frame(ErrorCode::Internal, e.to_string()),
            }
        }
        let response = ResponsePayload {
            query_id: query.query_id,
            words: self.db.row_words() as u32,
            vectors,
        };
        Frame::new(MSG_RESPONSE, response.encode(bits))
    }

    /// Serves one connection until the peer closes it or sends a frame that
    /// cannot be delimited.
    pub fn serve_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            match read_frame(&mut reader) {
                Ok(Some(frame)) => write_frame(&mut writer, &self.handle(&frame))?,
                Ok(None) => return Ok(()),
                Err(FrameError::Io(e)) => return Err(e),
                Err(e) => {
                    // framing lost: report and drop the connection
                    let _ = write_frame(&mut writer, &error_frame(ErrorCode::Malformed, e.to_string()));
                    return Ok(());
                }
            }
        }
    }
}

/// A [`PirServer`] listening on TCP.
pub struct TcpServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    connections: Arc<Mutex<HashMap<u64, TcpStream>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl TcpServer {
    pub fn bind(server: Arc<PirServer>, addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let connections: Arc<Mutex<HashMap<u64, TcpStream>>> = Arc::default();
        let acceptor = {
            let stop = stop.clone();
            let connections = connections.clone();
            thread::spawn(move || {
                for (id, stream) in (0u64..).zip(listener.incoming()) {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let _ = stream.set_nodelay(true);
                    if let Ok(clone) = stream.try_clone() {
                        connections.lock().unwrap().insert(id, clone);
                    }
                    let server = server.clone();
                    let connections = connections.clone();
                    thread::spawn(move || {
                        let _ = server.serve_connection(stream);
                        connections.lock().unwrap().remove(&id);
                    });
                }
            })
        };
        Ok(TcpServer {
            addr,
            stop,
            connections,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting and closes every open connection.
    pub fn shutdown(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        for (_, c) in self.connections.lock().unwrap().drain() {
            let _ = c.shutdown(Shutdown::Both);
        }
    }

    /// Blocks until the acceptor exits.
    pub fn wait(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for TcpServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}
