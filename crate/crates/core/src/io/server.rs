//! TCP instrument server: one [`InstrumentSession`] per connection, commands
//! handled strictly in order, one `\n`-terminated reply per command.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::session::{ErrorCode, InstrumentSession};
use crate::error::{Error, Result};

/// Longest accepted command line in bytes; longer lines get `ERR 2 parse`.
pub const MAX_LINE: usize = 64 * 1024;

pub type SessionFactory = Arc<dyn Fn() -> InstrumentSession + Send + Sync>;

pub struct Server {
    listener: TcpListener,
    factory: SessionFactory,
    stop: Arc<AtomicBool>,
}

/// Handle to a server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting connections and wait for the accept loop to exit.
    /// Connections already open keep running until their clients leave.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_and_join();
        }
    }
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, factory: SessionFactory) -> Result<Self> {
        let listener = TcpListener::bind(addr).map_err(|e| Error::Io(format!("cannot bind: {e}")))?;
        Ok(Server {
            listener,
            factory,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept connections until shut down.
    pub fn run(self) {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            match stream {
                Ok(stream) => {
                    let session = (self.factory)();
                    thread::spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = serve_connection(stream, session) {
                            log::debug!("connection {peer:?} ended: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }

    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::clone(&self.stop);
        let thread = thread::Builder::new()
            .name("squid-emu-accept".into())
            .spawn(move || self.run())?;
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

/// Serve one connection until the client disconnects or sends `QUIT`.
pub fn serve_connection(stream: TcpStream, mut session: InstrumentSession) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::with_capacity(128);
    loop {
        line.clear();
        let n = (&mut reader).take(MAX_LINE as u64 + 1).read_until(b'\n', &mut line)?;
        if n == 0 {
            return Ok(());
        }
        let terminated = line.last() == Some(&b'\n');
        if !terminated && line.len() > MAX_LINE {
            // discard the rest of the oversized line
            let mut sink = Vec::new();
            reader.read_until(b'\n', &mut sink)?;
            writer.write_all(format!("{}\n", ErrorCode::Parse.reply()).as_bytes())?;
            continue;
        }
        while matches!(line.last(), Some(b'\n' | b'\r')) {
            line.pop();
        }
        let reply = session.handle_line(&line);
        writer.write_all(reply.text.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if reply.close || !terminated {
            return Ok(());
        }
    }
}
