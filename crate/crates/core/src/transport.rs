//! Moving messages between roles.
//!
//! Over TCP each message travels as a 4-byte big-endian length followed by
//! the encoded message. The loopback transport runs the same encode/decode
//! path in process.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use thiserror::Error;

use crate::wire::{
    decode_message, encode_message, ErrorCode, Message, WireError, MAX_MESSAGE_BYTES,
};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("frame of {0} bytes exceeds the size limit")]
    FrameTooLarge(usize),
}

/// Something that answers requests: an honest server or an adversary.
pub trait Handler: Send + Sync {
    fn handle(&self, request: Message) -> Message;
}

impl<H: Handler + ?Sized> Handler for Arc<H> {
    fn handle(&self, request: Message) -> Message {
        (**self).handle(request)
    }
}

/// The requesting side of a connection.
pub trait Endpoint {
    fn call(&self, request: &Message) -> Result<Message, TransportError>;
}

/// In-process transport that still round-trips through the wire encoding.
pub struct Loopback<H> {
    handler: H,
}

impl<H: Handler> Loopback<H> {
    pub fn new(handler: H) -> Self {
        Loopback { handler }
    }

    pub fn handler(&self) -> &H {
        &self.handler
    }
}

impl<H: Handler> Endpoint for Loopback<H> {
    fn call(&self, request: &Message) -> Result<Message, TransportError> {
        let request = decode_message(&encode_message(request))?;
        let response = self.handler.handle(request);
        Ok(decode_message(&encode_message(&response))?)
    }
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<(), TransportError> {
    let bytes = encode_message(msg);
    if bytes.len() > MAX_MESSAGE_BYTES {
        return Err(TransportError::FrameTooLarge(bytes.len()));
    }
    w.write_all(&(bytes.len() as u32).to_be_bytes())?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` means the peer closed the connection cleanly
/// between frames.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, TransportError> {
    let mut header = [0u8; 4];
    match r.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_MESSAGE_BYTES {
        return Err(TransportError::FrameTooLarge(len));
    }
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(
            io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed mid-frame").into(),
        );
    }
    Ok(Some(buf))
}

/// Client side of a TCP connection; one connection per request.
#[derive(Clone, Debug)]
pub struct TcpEndpoint {
    addr: SocketAddr,
}

impl TcpEndpoint {
    pub fn new(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let addr = addr.to_socket_addrs()?.next().ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidInput, "address resolved to nothing")
        })?;
        Ok(TcpEndpoint { addr })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Endpoint for TcpEndpoint {
    fn call(&self, request: &Message) -> Result<Message, TransportError> {
        let mut stream = TcpStream::connect(self.addr)?;
        write_frame(&mut stream, request)?;
        let frame = read_frame(&mut stream)?.ok_or_else(|| {
            io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the connection")
        })?;
        Ok(decode_message(&frame)?)
    }
}

fn serve_connection<H: Handler + ?Sized>(
    mut stream: TcpStream,
    handler: &H,
) -> Result<(), TransportError> {
    while let Some(frame) = read_frame(&mut stream)? {
        let response = match decode_message(&frame) {
            Ok(req) => handler.handle(req),
            Err(e) => Message::error(ErrorCode::Malformed, e.to_string()),
        };
        write_frame(&mut stream, &response)?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve(listener: TcpListener, handler: Arc<dyn Handler>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        let handler = Arc::clone(&handler);
        thread::spawn(move || {
            let _ = serve_connection(stream, handler.as_ref());
        });
    }
    Ok(())
}

/// Binds `addr` and serves on a background thread; returns the bound address.
pub fn spawn_server(addr: impl ToSocketAddrs, handler: Arc<dyn Handler>) -> io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let bound = listener.local_addr()?;
    thread::spawn(move || serve(listener, handler));
    Ok(bound)
}
