//! A read-only socket front for one chain: sequential accept loop, one
//! newline-terminated JSON request per line, one response line back.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::wire::{self, Request, Response};
use crate::chain::ChainInstance;

const IO_TIMEOUT: Duration = Duration::from_secs(5);

/// Serves one chain on a local TCP port until shut down (or dropped).
/// Binding port 0 picks an ephemeral port; [`NetworkServer::port`] reports
/// the actual one.
pub struct NetworkServer {
    port: u16,
    shutdown: Arc<AtomicBool>,
    requests: Arc<AtomicU64>,
    handle: Option<JoinHandle<()>>,
}

impl NetworkServer {
    pub fn spawn(chain: ChainInstance, port: u16) -> io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        let port = listener.local_addr()?.port();
        let shutdown = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicU64::new(0));
        let flag = Arc::clone(&shutdown);
        let counter = Arc::clone(&requests);
        let handle = std::thread::spawn(move || accept_loop(listener, chain, flag, counter));
        Ok(NetworkServer {
            port,
            shutdown,
            requests,
            handle: Some(handle),
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Number of request lines answered so far.
    pub fn requests_served(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if !self.shutdown.swap(true, Ordering::SeqCst) {
            // Poke the accept loop so it observes the flag.
            let _ = TcpStream::connect(("127.0.0.1", self.port));
        }
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for NetworkServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(
    listener: TcpListener,
    chain: ChainInstance,
    shutdown: Arc<AtomicBool>,
    requests: Arc<AtomicU64>,
) {
    for stream in listener.incoming() {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let _ = serve_connection(stream, &chain, &requests);
    }
}

fn serve_connection(stream: TcpStream, chain: &ChainInstance, requests: &AtomicU64) -> io::Result<()> {
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        let text = String::from_utf8_lossy(&line);
        requests.fetch_add(1, Ordering::SeqCst);
        let response = wire::respond(chain, text.trim_end_matches(['\r', '\n']));
        writer.write_all(response.encode().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
}

/// One request/response round trip against a serving network.
pub fn query(port: u16, request: &Request) -> Result<Response, QueryError> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).map_err(QueryError::Connect)?;
    stream.set_read_timeout(Some(IO_TIMEOUT)).map_err(QueryError::Io)?;
    stream.set_write_timeout(Some(IO_TIMEOUT)).map_err(QueryError::Io)?;
    let mut line = request.encode();
    line.push('\n');
    stream.write_all(line.as_bytes()).map_err(QueryError::Io)?;
    let mut reader = BufReader::new(stream);
    let mut reply = String::new();
    if reader.read_line(&mut reply).map_err(QueryError::Io)? == 0 {
        return Err(QueryError::Closed);
    }
    Response::parse_line(reply.trim_end_matches(['\r', '\n']))
        .map_err(|e| QueryError::Malformed(e.to_string()))
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("connect failed: {0}")]
    Connect(#[source] io::Error),
    #[error("socket error: {0}")]
    Io(#[source] io::Error),
    #[error("connection closed before a response line arrived")]
    Closed,
    #[error("malformed response: {0}")]
    Malformed(String),
}
