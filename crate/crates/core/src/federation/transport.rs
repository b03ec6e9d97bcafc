//! Channels between the broker and the providers, with a recorder of every
//! frame that crosses them.

use std::io::Write;

use super::message::{decode, encode, read_frame, Message};
use super::provider::DataProvider;
use crate::catalog::Party;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Broker,
    Provider(Party),
    Client,
}

/// One frame as sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub from: Endpoint,
    pub to: Endpoint,
    pub frame: Vec<u8>,
}

impl Envelope {
    pub fn message(&self) -> Result<Message> {
        decode(&self.frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportKind {
    /// Ordered in-process queues driven by a single-threaded scheduler.
    #[default]
    InProcess,
    /// Provider threads behind local stream sockets.
    Socket,
}

enum Link {
    Local(Box<DataProvider>),
    #[cfg(unix)]
    Socket { stream: std::os::unix::net::UnixStream, worker: Option<std::thread::JoinHandle<()>> },
}

#[cfg(unix)]
fn serve(mut provider: DataProvider, mut stream: std::os::unix::net::UnixStream) {
    while let Ok(Some(frame)) = read_frame(&mut stream) {
        let reply = match decode(&frame) {
            Ok(Message::Shutdown) => break,
            Ok(msg) => provider.handle(msg).unwrap_or_else(|e| Message::Failure(e.to_string())),
            Err(e) => Message::Failure(e.to_string()),
        };
        if stream.write_all(&encode(&reply)).is_err() {
            break;
        }
    }
}

/// The broker's side of both provider channels.
pub struct Channels {
    links: Vec<(Party, Link)>,
    pub log: Vec<Envelope>,
}

impl Channels {
    pub fn new(providers: Vec<DataProvider>, kind: TransportKind) -> Result<Channels> {
        let mut links = Vec::new();
        for p in providers {
            let party = p.party();
            let link = match kind {
                TransportKind::InProcess => Link::Local(Box::new(p)),
                #[cfg(unix)]
                TransportKind::Socket => {
                    let (ours, theirs) =
                        std::os::unix::net::UnixStream::pair().map_err(|e| Error::Execute(e.to_string()))?;
                    let worker = std::thread::spawn(move || serve(p, theirs));
                    Link::Socket { stream: ours, worker: Some(worker) }
                }
                #[cfg(not(unix))]
                TransportKind::Socket => return Err(Error::Execute("socket transport needs a unix platform".into())),
            };
            links.push((party, link));
        }
        Ok(Channels { links, log: Vec::new() })
    }

    /// Sends a request and waits for its reply. The in-process scheduler
    /// runs the provider until it has answered.
    pub fn call(&mut self, party: Party, msg: &Message) -> Result<Message> {
        let frame = encode(msg);
        self.log.push(Envelope { from: Endpoint::Broker, to: Endpoint::Provider(party), frame: frame.clone() });
        let link = &mut self.links.iter_mut().find(|(p, _)| *p == party).expect("both providers linked").1;
        let reply = match link {
            Link::Local(provider) => {
                let received = decode(&frame)?;
                encode(&provider.handle(received).unwrap_or_else(|e| Message::Failure(e.to_string())))
            }
            #[cfg(unix)]
            Link::Socket { stream, .. } => {
                stream.write_all(&frame).map_err(|e| Error::Execute(e.to_string()))?;
                read_frame(stream)?.ok_or_else(|| Error::Execute("provider closed its channel".into()))?
            }
        };
        self.log.push(Envelope { from: Endpoint::Provider(party), to: Endpoint::Broker, frame: reply.clone() });
        match decode(&reply)? {
            Message::Failure(e) => Err(Error::Execute(e)),
            m => Ok(m),
        }
    }

    /// Records the result handed to the client.
    pub fn deliver(&mut self, msg: &Message) {
        self.log.push(Envelope { from: Endpoint::Broker, to: Endpoint::Client, frame: encode(msg) });
    }
}

impl Drop for Channels {
    fn drop(&mut self) {
        for (_, link) in &mut self.links {
            #[cfg(unix)]
            if let Link::Socket { stream, worker } = link {
                let _ = stream.write_all(&encode(&Message::Shutdown));
                if let Some(w) = worker.take() {
                    let _ = w.join();
                }
            }
            #[cfg(not(unix))]
            let _ = link;
        }
    }
}
