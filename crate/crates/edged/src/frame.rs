//! Length-prefixed framing: a 4-byte big-endian body length followed by the
//! UTF-8 JSON body.

use std::io;

use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

pub const HEADER_BYTES: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame of {len} bytes exceeds the {max}-byte limit")]
    TooLarge { len: usize, max: usize },
}

pub fn encode_frame(body: &[u8], max: usize) -> Result<Vec<u8>, FrameError> {
    if body.len() > max || body.len() > u32::MAX as usize {
        return Err(FrameError::TooLarge {
            len: body.len(),
            max,
        });
    }
    let mut out = Vec::with_capacity(HEADER_BYTES + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Frame(Vec<u8>),
    /// A header announced a body over the limit. The body is skipped as it
    /// arrives and decoding resumes after it.
    Oversized(usize),
}

/// Incremental decoder for a byte stream.
#[derive(Debug)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    max: usize,
    skip: usize,
}

impl FrameDecoder {
    pub fn new(max: usize) -> Self {
        FrameDecoder {
            buf: Vec::new(),
            max,
            skip: 0,
        }
    }

    pub fn push(&mut self, mut data: &[u8]) {
        if self.skip > 0 {
            let n = self.skip.min(data.len());
            self.skip -= n;
            data = &data[n..];
        }
        self.buf.extend_from_slice(data);
    }

    pub fn next_frame(&mut self) -> Option<Decoded> {
        if self.skip > 0 {
            let n = self.skip.min(self.buf.len());
            self.buf.drain(..n);
            self.skip -= n;
            if self.skip > 0 {
                return None;
            }
        }
        if self.buf.len() < HEADER_BYTES {
            return None;
        }
        let len = u32::from_be_bytes(self.buf[..HEADER_BYTES].try_into().unwrap()) as usize;
        if len > self.max {
            self.buf.drain(..HEADER_BYTES);
            self.skip = len;
            let n = self.skip.min(self.buf.len());
            self.buf.drain(..n);
            self.skip -= n;
            return Some(Decoded::Oversized(len));
        }
        if self.buf.len() < HEADER_BYTES + len {
            return None;
        }
        let body = self.buf[HEADER_BYTES..HEADER_BYTES + len].to_vec();
        self.buf.drain(..HEADER_BYTES + len);
        Some(Decoded::Frame(body))
    }

    /// Bytes buffered but not yet returned.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}

/// Read one frame. `Ok(None)` on a clean end of stream between frames.
pub async fn read_frame<R: AsyncRead + Unpin>(
    reader: &mut R,
    max: usize,
) -> io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; HEADER_BYTES];
    match reader.read_exact(&mut header).await {
        Ok(_) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > max {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            FrameError::TooLarge { len, max }.to_string(),
        ));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).await?;
    Ok(Some(body))
}

pub async fn write_frame<W: AsyncWrite + Unpin>(
    writer: &mut W,
    body: &[u8],
    max: usize,
) -> io::Result<()> {
    let bytes = encode_frame(body, max)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    writer.write_all(&bytes).await?;
    writer.flush().await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let bytes = encode_frame(b"{\"a\":1}", 64).unwrap();
        assert_eq!(&bytes[..4], &[0, 0, 0, 7]);
        let mut d = FrameDecoder::new(64);
        d.push(&bytes);
        assert_eq!(d.next_frame(), Some(Decoded::Frame(b"{\"a\":1}".to_vec())));
        assert_eq!(d.next_frame(), None);
    }

    #[test]
    fn byte_at_a_time() {
        let mut stream = encode_frame(b"one", 64).unwrap();
        stream.extend(encode_frame(b"", 64).unwrap());
        stream.extend(encode_frame(b"three", 64).unwrap());
        let mut d = FrameDecoder::new(64);
        let mut got = Vec::new();
        for b in stream {
            d.push(&[b]);
            while let Some(f) = d.next_frame() {
                got.push(f);
            }
        }
        assert_eq!(
            got,
            [
                Decoded::Frame(b"one".to_vec()),
                Decoded::Frame(Vec::new()),
                Decoded::Frame(b"three".to_vec())
            ]
        );
        assert_eq!(d.pending(), 0);
    }

    #[test]
    fn oversized_is_skipped() {
        let mut stream = (100u32).to_be_bytes().to_vec();
        stream.extend(vec![b'x'; 100]);
        stream.extend(encode_frame(b"ok", 16).unwrap());
        for chunk in [1, 7, 50, 1000] {
            let mut d = FrameDecoder::new(16);
            let mut got = Vec::new();
            for part in stream.chunks(chunk) {
                d.push(part);
                while let Some(f) = d.next_frame() {
                    got.push(f);
                }
            }
            assert_eq!(
                got,
                [Decoded::Oversized(100), Decoded::Frame(b"ok".to_vec())],
                "chunk {chunk}"
            );
        }
    }

    #[test]
    fn encode_rejects_oversized() {
        assert_eq!(
            encode_frame(&[0; 10], 9),
            Err(FrameError::TooLarge { len: 10, max: 9 })
        );
    }

    #[tokio::test]
    async fn async_helpers() {
        let (mut a, mut b) = tokio::io::duplex(256);
        write_frame(&mut a, b"hello", 64).await.unwrap();
        drop(a);
        assert_eq!(
            read_frame(&mut b, 64).await.unwrap(),
            Some(b"hello".to_vec())
        );
        assert_eq!(read_frame(&mut b, 64).await.unwrap(), None);
    }
}
