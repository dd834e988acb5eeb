//! WebSocket relay for browser clients: JSON commands in, JSON updates out.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Serialize;
use tungstenite::{Message, WebSocket};

use super::mailbox::Mailbox;
use super::protocol::ClientMessage;

const ACCEPT_POLL: Duration = Duration::from_millis(5);
const CLIENT_POLL: Duration = Duration::from_millis(2);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BridgeStats {
    pub connected: u64,
    pub active: u64,
    pub sent: u64,
    /// Outbound frames replaced before a slow client took them.
    pub dropped: u64,
    pub received: u64,
    pub malformed: u64,
}

#[derive(Default)]
struct Counters {
    connected: AtomicU64,
    sent: AtomicU64,
    dropped: AtomicU64,
    received: AtomicU64,
    malformed: AtomicU64,
}

struct Client {
    outbox: Arc<Mutex<Option<String>>>,
    alive: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

pub struct Bridge {
    addr: SocketAddr,
    clients: Arc<Mutex<Vec<Client>>>,
    counters: Arc<Counters>,
    hello: Arc<Mutex<String>>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl Bridge {
    /// Starts accepting on `listener`. Inbound commands go to `mailbox`;
    /// every new client first receives `hello`.
    pub fn start(
        listener: TcpListener,
        mailbox: Arc<Mailbox>,
        hello: String,
    ) -> std::io::Result<Self> {
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let clients: Arc<Mutex<Vec<Client>>> = Arc::default();
        let counters: Arc<Counters> = Arc::default();
        let hello = Arc::new(Mutex::new(hello));
        let stop = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let (clients, counters, hello, stop) = (
                clients.clone(),
                counters.clone(),
                hello.clone(),
                stop.clone(),
            );
            std::thread::Builder::new()
                .name("ws-accept".into())
                .spawn(move || accept_loop(listener, mailbox, clients, counters, hello, stop))?
        };
        Ok(Self {
            addr,
            clients,
            counters,
            hello,
            stop,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn set_hello(&self, hello: String) {
        *self.hello.lock().unwrap() = hello;
    }

    /// Queues `text` for every connected client, replacing anything it has
    /// not sent yet.
    pub fn broadcast(&self, text: &str) {
        let mut clients = self.clients.lock().unwrap();
        clients.retain_mut(|c| {
            if c.alive.load(Ordering::Acquire) {
                return true;
            }
            if let Some(t) = c.thread.take() {
                let _ = t.join();
            }
            false
        });
        for c in clients.iter() {
            if c.outbox.lock().unwrap().replace(text.to_owned()).is_some() {
                self.counters.dropped.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    pub fn stats(&self) -> BridgeStats {
        let active = self
            .clients
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.alive.load(Ordering::Acquire))
            .count() as u64;
        BridgeStats {
            connected: self.counters.connected.load(Ordering::Relaxed),
            active,
            sent: self.counters.sent.load(Ordering::Relaxed),
            dropped: self.counters.dropped.load(Ordering::Relaxed),
            received: self.counters.received.load(Ordering::Relaxed),
            malformed: self.counters.malformed.load(Ordering::Relaxed),
        }
    }

    /// Waits until every queued frame has been written or its client is gone.
    pub fn drain(&self, timeout: Duration) {
        let deadline = std::time::Instant::now() + timeout;
        while std::time::Instant::now() < deadline {
            let pending = self
                .clients
                .lock()
                .unwrap()
                .iter()
                .any(|c| c.alive.load(Ordering::Acquire) && c.outbox.lock().unwrap().is_some());
            if !pending {
                return;
            }
            std::thread::sleep(Duration::from_millis(1));
        }
    }

    pub fn shutdown(mut self) -> BridgeStats {
        self.stop_threads();
        self.stats()
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::Release);
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
        for c in self.clients.lock().unwrap().iter_mut() {
            if let Some(t) = c.thread.take() {
                let _ = t.join();
            }
        }
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn accept_loop(
    listener: TcpListener,
    mailbox: Arc<Mailbox>,
    clients: Arc<Mutex<Vec<Client>>>,
    counters: Arc<Counters>,
    hello: Arc<Mutex<String>>,
    stop: Arc<AtomicBool>,
) {
    while !stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let outbox = Arc::new(Mutex::new(None));
                let alive = Arc::new(AtomicBool::new(true));
                let ctx = ClientContext {
                    mailbox: mailbox.clone(),
                    counters: counters.clone(),
                    outbox: outbox.clone(),
                    alive: alive.clone(),
                    stop: stop.clone(),
                };
                let greeting = hello.lock().unwrap().clone();
                let spawned = std::thread::Builder::new()
                    .name(format!("ws-{peer}"))
                    .spawn(move || serve_client(stream, greeting, ctx));
                match spawned {
                    Ok(thread) => {
                        counters.connected.fetch_add(1, Ordering::Relaxed);
                        clients.lock().unwrap().push(Client {
                            outbox,
                            alive,
                            thread: Some(thread),
                        });
                    }
                    Err(e) => log::warn!("cannot start client thread for {peer}: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(ACCEPT_POLL),
            Err(e) => {
                log::warn!("websocket accept failed: {e}");
                std::thread::sleep(ACCEPT_POLL);
            }
        }
    }
}

struct ClientContext {
    mailbox: Arc<Mailbox>,
    counters: Arc<Counters>,
    outbox: Arc<Mutex<Option<String>>>,
    alive: Arc<AtomicBool>,
    stop: Arc<AtomicBool>,
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn serve_client(stream: TcpStream, hello: String, ctx: ClientContext) {
    let result = (|| -> Result<(), tungstenite::Error> {
        stream.set_nonblocking(false)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
        let mut ws = tungstenite::accept(stream).map_err(|e| match e {
            tungstenite::HandshakeError::Failure(e) => e,
            tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::Io(
                std::io::Error::new(ErrorKind::TimedOut, "handshake timed out"),
            ),
        })?;
        ws.get_ref().set_read_timeout(Some(CLIENT_POLL))?;
        ws.send(Message::Text(hello))?;
        client_loop(&mut ws, &ctx)
    })();
    match result {
        Ok(())
        | Err(tungstenite::Error::ConnectionClosed)
        | Err(tungstenite::Error::AlreadyClosed) => {}
        Err(e) => log::debug!("websocket client dropped: {e}"),
    }
    ctx.alive.store(false, Ordering::Release);
}

fn client_loop(
    ws: &mut WebSocket<TcpStream>,
    ctx: &ClientContext,
) -> Result<(), tungstenite::Error> {
    loop {
        if ctx.stop.load(Ordering::Acquire) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        let next = ctx.outbox.lock().unwrap().take();
        if let Some(text) = next {
            ws.send(Message::Text(text))?;
            ctx.counters.sent.fetch_add(1, Ordering::Relaxed);
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                ctx.counters.received.fetch_add(1, Ordering::Relaxed);
                match ClientMessage::parse(&text).and_then(ClientMessage::into_inbound) {
                    Ok(msg) => {
                        ctx.mailbox.post(msg);
                    }
                    Err(e) => {
                        ctx.counters.malformed.fetch_add(1, Ordering::Relaxed);
                        ctx.mailbox.count_malformed();
                        log::debug!("{e}");
                    }
                }
            }
            Ok(Message::Binary(bytes)) => {
                // Binary frames carry the UDP wire format.
                ctx.counters.received.fetch_add(1, Ordering::Relaxed);
                if ctx.mailbox.post_datagram(&bytes).is_err() {
                    ctx.counters.malformed.fetch_add(1, Ordering::Relaxed);
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e),
        }
    }
}
