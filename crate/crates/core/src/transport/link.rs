//! Byte-level frame carriers: an in-process pair and a TCP stream.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::JoinHandle;

use super::frame::{Frame, FRAME_HEADER_LEN};
use crate::error::{Error, Result};

/// Moves whole encoded frames between the two endpoints.
pub trait Link: Send {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<()>;
    fn recv_frame(&mut self) -> Result<Vec<u8>>;
}

pub struct MemLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

pub fn mem_pair() -> (MemLink, MemLink) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (MemLink { tx: tx_a, rx: rx_a }, MemLink { tx: tx_b, rx: rx_b })
}

impl Link for MemLink {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<()> {
        self.tx.send(frame).map_err(|_| Error::Channel("peer endpoint dropped".into()))
    }

    fn recv_frame(&mut self) -> Result<Vec<u8>> {
        self.rx.recv().map_err(|_| Error::Channel("peer endpoint dropped".into()))
    }
}

/// TCP endpoint. Writes go through a dedicated thread so that both parties can push a
/// large round message at once without deadlocking on full socket buffers.
pub struct TcpLink {
    writer: Option<Sender<Vec<u8>>>,
    writer_thread: Option<JoinHandle<std::io::Result<()>>>,
    reader: BufReader<TcpStream>,
}

impl TcpLink {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?)
    }

    pub fn accept(listener: &TcpListener) -> Result<Self> {
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream)
    }

    pub fn from_stream(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let write_half = stream.try_clone()?;
        let (tx, rx) = channel::<Vec<u8>>();
        let handle = std::thread::spawn(move || {
            let mut w = BufWriter::new(write_half);
            for frame in rx {
                w.write_all(&frame)?;
                w.flush()?;
            }
            Ok(())
        });
        Ok(Self { writer: Some(tx), writer_thread: Some(handle), reader: BufReader::new(stream) })
    }
}

impl Link for TcpLink {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<()> {
        let tx = self.writer.as_ref().ok_or_else(|| Error::Channel("link closed".into()))?;
        tx.send(frame).map_err(|_| Error::Channel("tcp writer stopped".into()))
    }

    fn recv_frame(&mut self) -> Result<Vec<u8>> {
        let mut header = [0u8; FRAME_HEADER_LEN];
        self.reader
            .read_exact(&mut header)
            .map_err(|e| Error::Channel(format!("tcp read: {e}")))?;
        let len = Frame::payload_len(&header)?;
        let mut buf = Vec::with_capacity(FRAME_HEADER_LEN + len);
        buf.extend_from_slice(&header);
        buf.resize(FRAME_HEADER_LEN + len, 0);
        self.reader
            .read_exact(&mut buf[FRAME_HEADER_LEN..])
            .map_err(|e| Error::Channel(format!("tcp read: {e}")))?;
        Ok(buf)
    }
}

impl Drop for TcpLink {
    fn drop(&mut self) {
        self.writer.take();
        if let Some(h) = self.writer_thread.take() {
            let _ = h.join();
        }
    }
}
