//! Length-prefixed frames: `DRPIR1`, a type byte, a big-endian u32 payload
//! length, then the payload.

use std::io::{self, Read, Write};

pub const FRAME_MAGIC: &[u8; 6] = b"DRPIR1";
pub const FRAME_HEADER_LEN: usize = 6 + 1 + 4;
/// Largest payload either side will accept.
pub const MAX_PAYLOAD: u32 = 64 << 20;

pub const MSG_QUERY: u8 = 0x01;
pub const MSG_RESPONSE: u8 = 0x02;
pub const MSG_DB_INFO: u8 = 0x03;
pub const MSG_DB_INFO_REQ: u8 = 0x04;
pub const MSG_ERROR: u8 = 0x7F;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("payload of {0} bytes exceeds the limit")]
    TooLarge(u32),
    #[error("truncated frame: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    /// Raw type byte; unknown values are kept so the peer can be told.
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: u8, payload: Vec<u8>) -> Self {
        Frame { msg_type, payload }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(FRAME_MAGIC);
        out.push(self.msg_type);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses one frame from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn parse(bytes: &[u8]) -> Result<(Frame, usize), FrameError> {
        let (msg_type, len) = parse_header(bytes)?;
        let total = FRAME_HEADER_LEN + len;
        if bytes.len() < total {
            return Err(FrameError::Truncated {
                need: total,
                have: bytes.len(),
            });
        }
        Ok((Frame::new(msg_type, bytes[FRAME_HEADER_LEN..total].to_vec()), total))
    }
}

fn parse_header(bytes: &[u8]) -> Result<(u8, usize), FrameError> {
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(FrameError::Truncated {
            need: FRAME_HEADER_LEN,
            have: bytes.len(),
        });
    }
    if &bytes[..6] != FRAME_MAGIC {
        return Err(FrameError::BadMagic);
    }
    let len = u32::from_be_bytes(bytes[7..11].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLarge(len));
    }
    Ok((bytes[6], len as usize))
}

/// Reads one frame. `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame<R: Read>(input: &mut R) -> Result<Option<Frame>, FrameError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    let mut got = 0;
    while got < header.len() {
        match input.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(FrameError::Truncated {
                    need: FRAME_HEADER_LEN,
                    have: got,
                })
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (msg_type, len) = parse_header(&header)?;
    let mut payload = vec![0u8; len];
    input.read_exact(&mut payload)?;
    Ok(Some(Frame::new(msg_type, payload)))
}

pub fn write_frame<W: Write>(out: &mut W, frame: &Frame) -> io::Result<()> {
    out.write_all(&frame.to_bytes())?;
    out.flush()
}
