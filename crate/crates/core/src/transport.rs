//! Per-channel cell transport.
//!
//! Each channel is an ordered stream of fixed-width cells with no framing
//! bytes: the width is known from the key. Two backends exist: bounded
//! in-memory queues, and one TCP connection per channel on consecutive
//! ports.

use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use crate::channel_select::ChannelId;
use crate::error::{Error, Result};
use crate::scheme::ChannelPacket;

/// Capacity of each in-memory queue, in cells.
pub const MEMORY_QUEUE_CELLS: usize = 1024;

enum Backend {
    Memory {
        tx: Option<SyncSender<Vec<u8>>>,
        rx: Receiver<Vec<u8>>,
    },
    Tcp(TcpStream),
}

/// One end of one channel.
pub struct ChannelEndpoint {
    channel: ChannelId,
    cell_width: usize,
    timeout: Option<Duration>,
    backend: Backend,
}

impl std::fmt::Debug for ChannelEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let backend = match self.backend {
            Backend::Memory { .. } => "memory",
            Backend::Tcp(_) => "tcp",
        };
        f.debug_struct("ChannelEndpoint")
            .field("channel", &self.channel)
            .field("cell_width", &self.cell_width)
            .field("backend", &backend)
            .finish()
    }
}

impl ChannelEndpoint {
    pub fn channel(&self) -> ChannelId {
        self.channel
    }

    pub fn cell_width(&self) -> usize {
        self.cell_width
    }

    pub fn send_cell(&mut self, cell: &[u8]) -> Result<()> {
        if cell.len() != self.cell_width {
            return Err(Error::BadWidth {
                expected: self.cell_width,
                actual: cell.len(),
            });
        }
        let channel = self.channel.0;
        match &mut self.backend {
            Backend::Memory { tx, .. } => tx
                .as_ref()
                .ok_or(Error::Closed(channel))?
                .send(cell.to_vec())
                .map_err(|_| Error::Closed(channel)),
            Backend::Tcp(stream) => stream.write_all(cell).map_err(|e| io_error(e, channel)),
        }
    }

    /// Blocks until a whole cell arrives.
    pub fn recv_cell(&mut self) -> Result<Vec<u8>> {
        let channel = self.channel.0;
        match &mut self.backend {
            Backend::Memory { rx, .. } => match self.timeout {
                None => rx.recv().map_err(|_| Error::Closed(channel)),
                Some(limit) => rx.recv_timeout(limit).map_err(|e| match e {
                    RecvTimeoutError::Timeout => {
                        Error::Timeout(format!("no cell on channel {channel}"))
                    }
                    RecvTimeoutError::Disconnected => Error::Closed(channel),
                }),
            },
            Backend::Tcp(stream) => {
                let mut cell = vec![0u8; self.cell_width];
                let mut filled = 0;
                while filled < cell.len() {
                    match stream.read(&mut cell[filled..]) {
                        Ok(0) if filled == 0 => return Err(Error::Closed(channel)),
                        Ok(0) => return Err(Error::PartialCell(channel)),
                        Ok(n) => filled += n,
                        Err(e) if e.kind() == ErrorKind::Interrupted => {}
                        Err(e) => return Err(io_error(e, channel)),
                    }
                }
                Ok(cell)
            }
        }
    }

    /// Stops sending; the peer sees `Closed` once it has drained the
    /// cells already in flight.
    pub fn close(&mut self) {
        match &mut self.backend {
            Backend::Memory { tx, .. } => {
                tx.take();
            }
            Backend::Tcp(stream) => {
                let _ = stream.flush();
                let _ = stream.shutdown(Shutdown::Write);
            }
        }
    }

    fn set_timeout(&mut self, timeout: Option<Duration>) -> Result<()> {
        self.timeout = timeout;
        if let Backend::Tcp(stream) = &self.backend {
            stream.set_read_timeout(timeout)?;
        }
        Ok(())
    }
}

fn io_error(e: std::io::Error, channel: u16) -> Error {
    match e.kind() {
        ErrorKind::UnexpectedEof
        | ErrorKind::BrokenPipe
        | ErrorKind::ConnectionReset
        | ErrorKind::ConnectionAborted => Error::Closed(channel),
        ErrorKind::WouldBlock | ErrorKind::TimedOut => {
            Error::Timeout(format!("no cell on channel {channel}"))
        }
        _ => Error::Io(e),
    }
}

/// All `A` channels between the two parties, indexed by channel id.
#[derive(Debug)]
pub struct TransportBundle {
    endpoints: Vec<ChannelEndpoint>,
}

impl TransportBundle {
    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn endpoint(&mut self, channel: ChannelId) -> Result<&mut ChannelEndpoint> {
        let count = self.endpoints.len();
        self.endpoints
            .get_mut(channel.index())
            .ok_or(Error::SizeMismatch {
                expected: count,
                actual: channel.index() + 1,
            })
    }

    /// Read timeout applied to every channel; `None` blocks forever.
    pub fn set_timeout(&mut self, timeout: Option<Duration>) -> Result<()> {
        self.endpoints
            .iter_mut()
            .try_for_each(|ep| ep.set_timeout(timeout))
    }

    pub fn close(&mut self) {
        self.endpoints.iter_mut().for_each(ChannelEndpoint::close);
    }
}

/// Two connected bundles over bounded in-memory queues.
pub fn memory_pair(cell_widths: &[usize]) -> Result<(TransportBundle, TransportBundle)> {
    check_census(cell_widths)?;
    let mut left = Vec::with_capacity(cell_widths.len());
    let mut right = Vec::with_capacity(cell_widths.len());
    for (id, &cell_width) in cell_widths.iter().enumerate() {
        let (to_right, from_left) = mpsc::sync_channel(MEMORY_QUEUE_CELLS);
        let (to_left, from_right) = mpsc::sync_channel(MEMORY_QUEUE_CELLS);
        let channel = ChannelId(id as u16);
        left.push(ChannelEndpoint {
            channel,
            cell_width,
            timeout: None,
            backend: Backend::Memory {
                tx: Some(to_right),
                rx: from_right,
            },
        });
        right.push(ChannelEndpoint {
            channel,
            cell_width,
            timeout: None,
            backend: Backend::Memory {
                tx: Some(to_left),
                rx: from_left,
            },
        });
    }
    Ok((
        TransportBundle { endpoints: left },
        TransportBundle { endpoints: right },
    ))
}

fn check_census(cell_widths: &[usize]) -> Result<()> {
    if cell_widths.is_empty() || cell_widths.len() > usize::from(u16::MAX) {
        return Err(Error::BadParameters(format!(
            "channel count {} outside 1..=65535",
            cell_widths.len()
        )));
    }
    Ok(())
}

fn port_for(port_base: u16, index: usize) -> Result<u16> {
    u16::try_from(usize::from(port_base) + index)
        .map_err(|_| Error::BadParameters(format!("port range from {port_base} overflows")))
}

/// Listening side of a TCP bundle: one listener per channel on ports
/// `port_base .. port_base + A`.
#[derive(Debug)]
pub struct TcpBundleListener {
    listeners: Vec<TcpListener>,
    cell_widths: Vec<usize>,
}

impl TcpBundleListener {
    pub fn bind(host: &str, port_base: u16, cell_widths: &[usize]) -> Result<Self> {
        check_census(cell_widths)?;
        let listeners = (0..cell_widths.len())
            .map(|i| {
                let addr = format!("{host}:{}", port_for(port_base, i)?);
                TcpListener::bind(&addr).map_err(|source| Error::BindFailed { addr, source })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TcpBundleListener {
            listeners,
            cell_widths: cell_widths.to_vec(),
        })
    }

    pub fn ports(&self) -> Vec<u16> {
        self.listeners
            .iter()
            .filter_map(|l| l.local_addr().ok().map(|a| a.port()))
            .collect()
    }

    /// Accepts one connection per channel, in channel order.
    pub fn accept(self, timeout: Option<Duration>) -> Result<TransportBundle> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut endpoints = Vec::with_capacity(self.listeners.len());
        for (id, (listener, &cell_width)) in
            self.listeners.iter().zip(&self.cell_widths).enumerate()
        {
            let stream = accept_before(listener, deadline)?;
            stream.set_nodelay(true)?;
            endpoints.push(ChannelEndpoint {
                channel: ChannelId(id as u16),
                cell_width,
                timeout: None,
                backend: Backend::Tcp(stream),
            });
        }
        Ok(TransportBundle { endpoints })
    }
}

fn accept_before(listener: &TcpListener, deadline: Option<Instant>) -> Result<TcpStream> {
    let Some(deadline) = deadline else {
        return Ok(listener.accept()?.0);
    };
    listener.set_nonblocking(true)?;
    loop {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                return Ok(stream);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Timeout("waiting for sender connections".into()));
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Connecting side of a TCP bundle. Retries refused connections until
/// `timeout` so the two processes can start in either order.
pub fn tcp_connect(
    host: &str,
    port_base: u16,
    cell_widths: &[usize],
    timeout: Duration,
) -> Result<TransportBundle> {
    check_census(cell_widths)?;
    let deadline = Instant::now() + timeout;
    let mut endpoints = Vec::with_capacity(cell_widths.len());
    for (id, &cell_width) in cell_widths.iter().enumerate() {
        let addr = format!("{host}:{}", port_for(port_base, id)?);
        let stream = loop {
            let resolved = addr
                .to_socket_addrs()
                .map_err(|source| Error::ConnectFailed {
                    addr: addr.clone(),
                    source,
                })?
                .next()
                .ok_or_else(|| Error::ConnectFailed {
                    addr: addr.clone(),
                    source: std::io::Error::new(ErrorKind::NotFound, "no address"),
                })?;
            let remaining = deadline.saturating_duration_since(Instant::now());
            match TcpStream::connect_timeout(&resolved, remaining.max(Duration::from_millis(1))) {
                Ok(stream) => break stream,
                Err(source) if Instant::now() >= deadline => {
                    return Err(Error::ConnectFailed { addr, source });
                }
                Err(_) => thread::sleep(Duration::from_millis(20)),
            }
        };
        stream.set_nodelay(true)?;
        endpoints.push(ChannelEndpoint {
            channel: ChannelId(id as u16),
            cell_width,
            timeout: None,
            backend: Backend::Tcp(stream),
        });
    }
    Ok(TransportBundle { endpoints })
}

/// Sends one cell on every channel.
pub fn broadcast_superblock(bundle: &mut TransportBundle, packets: &[ChannelPacket]) -> Result<()> {
    if packets.len() != bundle.len() {
        return Err(Error::SizeMismatch {
            expected: bundle.len(),
            actual: packets.len(),
        });
    }
    for packet in packets {
        bundle
            .endpoint(packet.channel)?
            .send_cell(&packet.payload)?;
    }
    Ok(())
}

/// Reads one cell from every channel and returns the selected ones,
/// ordered by channel id.
///
/// Non-selected channels are drained too, so every stream advances by
/// exactly one cell per call. Returns `Ok(None)` when every channel ended
/// cleanly at this boundary.
pub fn gather_superblock(
    bundle: &mut TransportBundle,
    selected: &[ChannelId],
) -> Result<Option<Vec<ChannelPacket>>> {
    let mut wanted = vec![false; bundle.len()];
    for channel in selected {
        *wanted.get_mut(channel.index()).ok_or(Error::SizeMismatch {
            expected: bundle.len(),
            actual: channel.index() + 1,
        })? = true;
    }
    let mut packets = Vec::with_capacity(selected.len());
    for (index, endpoint) in bundle.endpoints.iter_mut().enumerate() {
        let cell = match endpoint.recv_cell() {
            Ok(cell) => cell,
            Err(Error::Closed(_)) if index == 0 => {
                return at_end(&mut bundle.endpoints[1..]).map(|()| None);
            }
            Err(e) => return Err(e),
        };
        if wanted[index] {
            packets.push(ChannelPacket::received(endpoint.channel, cell));
        }
    }
    Ok(Some(packets))
}

fn at_end(rest: &mut [ChannelEndpoint]) -> Result<()> {
    for endpoint in rest {
        match endpoint.recv_cell() {
            Err(Error::Closed(_)) => {}
            Ok(_) => return Err(Error::Closed(0)),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
