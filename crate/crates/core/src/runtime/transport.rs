//! Ordered, reliable byte channels between the session's actors.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Error, Result};
use crate::runtime::Role;

/// Moves one encoded message from `from` to `to` and hands back the bytes
/// as the receiver observes them.
pub trait Transport: Send {
    fn carry(&mut self, from: Role, to: Role, bytes: Vec<u8>) -> Result<Vec<u8>>;
}

type Link = (Sender<Vec<u8>>, Receiver<Vec<u8>>);

/// In-process channels, one per ordered pair of roles.
#[derive(Default)]
pub struct InMemoryTransport {
    links: HashMap<(Role, Role), Link>,
}

impl InMemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Transport for InMemoryTransport {
    fn carry(&mut self, from: Role, to: Role, bytes: Vec<u8>) -> Result<Vec<u8>> {
        let (tx, rx) = self.links.entry((from, to)).or_insert_with(channel);
        tx.send(bytes).map_err(|e| Error::Wire(e.to_string()))?;
        rx.recv().map_err(|e| Error::Wire(e.to_string()))
    }
}

/// Loopback TCP sockets, one connection per ordered pair of roles. Frames
/// are the wire message prefixed by its length as a little-endian `u64`.
#[derive(Default)]
pub struct TcpTransport {
    links: HashMap<(Role, Role), (TcpStream, TcpStream)>,
}

impl TcpTransport {
    pub fn new() -> Self {
        Self::default()
    }

    fn connect() -> Result<(TcpStream, TcpStream)> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let writer = TcpStream::connect(listener.local_addr()?)?;
        let (reader, _) = listener.accept()?;
        writer.set_nodelay(true)?;
        Ok((writer, reader))
    }
}

impl Transport for TcpTransport {
    fn carry(&mut self, from: Role, to: Role, bytes: Vec<u8>) -> Result<Vec<u8>> {
        if !self.links.contains_key(&(from, to)) {
            self.links.insert((from, to), Self::connect()?);
        }
        let (writer, reader) = self.links.get_mut(&(from, to)).expect("inserted above");
        std::thread::scope(|s| {
            let send = s.spawn(|| -> std::io::Result<()> {
                writer.write_all(&(bytes.len() as u64).to_le_bytes())?;
                writer.write_all(&bytes)?;
                writer.flush()
            });
            let mut len = [0u8; 8];
            reader.read_exact(&mut len)?;
            let mut buf = vec![0u8; u64::from_le_bytes(len) as usize];
            reader.read_exact(&mut buf)?;
            send.join().map_err(|_| Error::Wire("sender thread panicked".into()))??;
            Ok(buf)
        })
    }
}
