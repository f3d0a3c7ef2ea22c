//! Whole-message transfer over a [`TransportBundle`]: pad and stream
//! superblocks on the sending side, gather and unpad on the receiving
//! side.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::cipher::{pad, padding_len, SuperBlock};
use crate::error::{Error, Result};
use crate::scheme::{ChannelPacket, Receiver, Sender};
use crate::transport::{broadcast_superblock, gather_superblock, TransportBundle};

/// Raw per-channel cell streams written to `ch_<id>.bin`.
pub struct Capture {
    files: Vec<BufWriter<File>>,
}

impl Capture {
    pub fn create(dir: &Path, channels: usize) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let files = (0..channels)
            .map(|id| Ok(BufWriter::new(File::create(capture_path(dir, id))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Capture { files })
    }

    pub fn record(&mut self, packets: &[ChannelPacket]) -> Result<()> {
        for p in packets {
            self.files
                .get_mut(p.channel.index())
                .ok_or(Error::MissingChannel(p.channel.0))?
                .write_all(&p.payload)?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        for mut f in self.files {
            f.flush()?;
        }
        Ok(())
    }
}

pub fn capture_path(dir: &Path, channel: usize) -> PathBuf {
    dir.join(format!("ch_{channel}.bin"))
}

/// Reads until `buf` is full or the input ends; returns bytes read.
fn read_full(input: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

/// Streams `input` to the receiver and closes every channel afterwards.
/// Returns the number of superblocks sent.
pub fn send_stream(
    sender: &mut Sender,
    input: &mut impl Read,
    bundle: &mut TransportBundle,
    mut capture: Option<&mut Capture>,
) -> Result<u64> {
    let bits = sender.config().superblock_bits();
    let width = sender.config().superblock_bytes();
    let mut buf = vec![0u8; width];
    let mut sent = 0u64;
    loop {
        let n = read_full(input, &mut buf)?;
        let blocks = if n == width {
            vec![SuperBlock(buf.clone())]
        } else {
            pad(&buf[..n], bits)?
        };
        for block in &blocks {
            let packets = sender.process_superblock(block)?;
            if let Some(capture) = capture.as_deref_mut() {
                capture.record(&packets)?;
            }
            broadcast_superblock(bundle, &packets)?;
            sent += 1;
        }
        if n < width {
            break;
        }
    }
    bundle.close();
    Ok(sent)
}

/// Receives superblocks until the sender closes the channels, writing the
/// unpadded plaintext to `output`. Returns the number of plaintext bytes.
pub fn receive_stream(
    receiver: &mut Receiver,
    bundle: &mut TransportBundle,
    output: &mut impl Write,
) -> Result<u64> {
    // the last superblock carries the padding, so one is always held back
    let mut pending: Option<SuperBlock> = None;
    let mut written = 0u64;
    loop {
        let selected = receiver.next_selection()?;
        let Some(packets) = gather_superblock(bundle, &selected)? else {
            break;
        };
        let block = receiver.process_packets(&packets)?;
        if let Some(previous) = pending.replace(block) {
            output.write_all(&previous.0)?;
            written += previous.0.len() as u64;
        }
    }
    let last = pending.ok_or(Error::BadPadding)?;
    let keep = last.0.len() - padding_len(&last.0)?;
    output.write_all(&last.0[..keep])?;
    output.flush()?;
    Ok(written + keep as u64)
}

/// In-memory convenience wrappers.
pub fn send_message(
    sender: &mut Sender,
    data: &[u8],
    bundle: &mut TransportBundle,
    capture: Option<&mut Capture>,
) -> Result<u64> {
    send_stream(sender, &mut &data[..], bundle, capture)
}

pub fn receive_message(receiver: &mut Receiver, bundle: &mut TransportBundle) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    receive_stream(receiver, bundle, &mut out)?;
    Ok(out)
}
