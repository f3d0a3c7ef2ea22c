//! The two-phase protocol: a one-time setup that produces the shared key,
//! followed by sessions in which the sender turns each superblock into one
//! fixed-width cell per channel and the receiver inverts that.
//!
//! Within a session every superblock travels on the same `S` selected
//! channels; the other `A - S` channels carry decoy cells of the same
//! width in lockstep. A new session (fresh channel selection, CBC chain
//! reset to the IV) starts every `superblocks_per_session` superblocks.

use crate::channel_select::{
    assign_moduli, select_channels, AssignmentMode, ChannelAssignment, ChannelId, Prng,
    CHANNEL_DOMAIN, DECOY_DOMAIN, MODULI_DOMAIN,
};
use crate::cipher::{to_fixed_be, Block, CipherId, CipherSuite, SuperBlock, MAX_SUPERBLOCK_BYTES};
use crate::crt::{crt_combine, crt_split, gen_moduli_for, ModuliSet, Natural, ResidueVector};
use crate::error::{Error, Result};

pub const DEFAULT_SUPERBLOCKS_PER_SESSION: u32 = 1024;

/// Everything both parties must share: the scheme's composite key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupConfig {
    cipher: CipherSuite,
    available: u16,
    used: u16,
    multiplier: u16,
    seed: u64,
    mode: AssignmentMode,
    superblocks_per_session: u32,
    moduli: ModuliSet,
}

/// Parameters accepted by [`setup`].
#[derive(Debug, Clone)]
pub struct SetupParams<'a> {
    pub cipher: CipherId,
    pub key: &'a [u8],
    pub iv: &'a [u8],
    pub available: u16,
    pub used: u16,
    pub multiplier: u16,
    pub seed: u64,
    pub mode: AssignmentMode,
}

/// Runs the setup phase: validates parameters and generates the moduli.
///
/// Dynamic mode generates `S` primes; static mode generates `A`, all of the
/// same `ceil(N/S) + 1` bits so that whichever `S` are selected still cover
/// the superblock.
pub fn setup(params: &SetupParams<'_>) -> Result<SetupConfig> {
    let cipher = CipherSuite::new(params.cipher, params.key, params.iv)?;
    check_counts(
        params.available,
        params.used,
        params.multiplier,
        cipher.block_bits(),
    )?;
    let bits = u64::from(params.multiplier) * cipher.block_bits();
    let count = match params.mode {
        AssignmentMode::Dynamic => params.used,
        AssignmentMode::Static => params.available,
    };
    let moduli = gen_moduli_for(
        bits,
        usize::from(params.used),
        usize::from(count),
        params.seed ^ MODULI_DOMAIN,
    )?;
    SetupConfig::from_parts(
        cipher,
        params.available,
        params.used,
        params.multiplier,
        params.seed,
        params.mode,
        DEFAULT_SUPERBLOCKS_PER_SESSION,
        moduli,
    )
}

fn check_counts(available: u16, used: u16, multiplier: u16, block_bits: u64) -> Result<()> {
    if used == 0 || used > available {
        return Err(Error::BadParameters(format!(
            "need 1 <= used ({used}) <= available ({available})"
        )));
    }
    let max_multiplier = (MAX_SUPERBLOCK_BYTES as u64 * 8 / block_bits) as u16;
    if multiplier == 0 || multiplier > max_multiplier {
        return Err(Error::BadParameters(format!(
            "multiplier {multiplier} outside 1..={max_multiplier}"
        )));
    }
    Ok(())
}

impl SetupConfig {
    /// Assembles a config from explicit parts, checking every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        cipher: CipherSuite,
        available: u16,
        used: u16,
        multiplier: u16,
        seed: u64,
        mode: AssignmentMode,
        superblocks_per_session: u32,
        moduli: ModuliSet,
    ) -> Result<Self> {
        check_counts(available, used, multiplier, cipher.block_bits())?;
        if superblocks_per_session == 0 {
            return Err(Error::BadParameters(
                "sessions must hold at least one superblock".into(),
            ));
        }
        let expected = match mode {
            AssignmentMode::Dynamic => usize::from(used),
            AssignmentMode::Static => usize::from(available),
        };
        if moduli.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: moduli.len(),
            });
        }
        let bits = u64::from(multiplier) * cipher.block_bits();
        // the S smallest moduli are the worst case for static mode
        let mut sorted: Vec<&Natural> = moduli.moduli().iter().collect();
        sorted.sort();
        let weakest: Natural = sorted.into_iter().take(usize::from(used)).product();
        if weakest.bits() <= bits {
            return Err(Error::ProductTooSmall { bits });
        }
        Ok(SetupConfig {
            cipher,
            available,
            used,
            multiplier,
            seed,
            mode,
            superblocks_per_session,
            moduli,
        })
    }

    pub fn with_superblocks_per_session(mut self, count: u32) -> Result<Self> {
        if count == 0 {
            return Err(Error::BadParameters(
                "sessions must hold at least one superblock".into(),
            ));
        }
        self.superblocks_per_session = count;
        Ok(self)
    }

    pub fn cipher(&self) -> &CipherSuite {
        &self.cipher
    }

    pub fn available(&self) -> u16 {
        self.available
    }

    pub fn used(&self) -> u16 {
        self.used
    }

    pub fn multiplier(&self) -> u16 {
        self.multiplier
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> AssignmentMode {
        self.mode
    }

    pub fn superblocks_per_session(&self) -> u32 {
        self.superblocks_per_session
    }

    pub fn moduli(&self) -> &ModuliSet {
        &self.moduli
    }

    /// `N = L * N_B`.
    pub fn superblock_bits(&self) -> u64 {
        u64::from(self.multiplier) * self.cipher.block_bits()
    }

    pub fn superblock_bytes(&self) -> usize {
        (self.superblock_bits() / 8) as usize
    }

    /// Cell width of every channel, indexed by channel id.
    ///
    /// Dynamic mode uses one width for all channels (the widest modulus), so
    /// widths never reveal the selection; static mode uses each channel's
    /// own modulus width.
    pub fn cell_widths(&self) -> Vec<usize> {
        match self.mode {
            AssignmentMode::Dynamic => {
                let widest = self.moduli.byte_widths().iter().copied().max().unwrap_or(0);
                vec![widest; usize::from(self.available)]
            }
            AssignmentMode::Static => self.moduli.byte_widths().to_vec(),
        }
    }

    /// Fresh channel-selection generator for this key.
    pub fn channel_prng(&self) -> Prng {
        Prng::for_domain(self.seed, CHANNEL_DOMAIN)
    }

    /// Default decoy generator for this key.
    pub fn decoy_prng(&self) -> Prng {
        Prng::for_domain(self.seed, DECOY_DOMAIN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sender,
    Receiver,
}

/// Per-session channel assignment and chaining state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    role: Role,
    assignment: ChannelAssignment,
    // moduli in selection order: basis[k] belongs to selected()[k]
    basis: ModuliSet,
    cbc_chain: Block,
    superblock_index: u32,
}

impl SessionState {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn assignment(&self) -> &ChannelAssignment {
        &self.assignment
    }

    pub fn selected(&self) -> &[ChannelId] {
        self.assignment.selected()
    }

    /// Moduli of the selected channels, in selection order.
    pub fn session_moduli(&self) -> &ModuliSet {
        &self.basis
    }

    pub fn cbc_chain(&self) -> &Block {
        &self.cbc_chain
    }

    pub fn superblock_index(&self) -> u32 {
        self.superblock_index
    }
}

/// Whether a cell carries a residue. Known only to the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Real,
    Decoy,
}

/// One cell on one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelPacket {
    pub channel: ChannelId,
    pub payload: Vec<u8>,
    /// `None` for packets read off the wire.
    pub kind: Option<PacketKind>,
}

impl ChannelPacket {
    pub fn received(channel: ChannelId, payload: Vec<u8>) -> Self {
        ChannelPacket {
            channel,
            payload,
            kind: None,
        }
    }
}

/// Selects this session's channels and binds their moduli; advances
/// `prng` so the next session draws a fresh selection.
pub fn begin_session(cfg: &SetupConfig, prng: &mut Prng, role: Role) -> Result<SessionState> {
    let selected = select_channels(prng, cfg.available, cfg.used)?;
    let assignment = assign_moduli(cfg.mode, &cfg.moduli, cfg.available, &selected)?;
    let basis = match cfg.mode {
        AssignmentMode::Dynamic => cfg.moduli.clone(),
        AssignmentMode::Static => cfg.moduli.subset(assignment.modulus_indices())?,
    };
    Ok(SessionState {
        role,
        assignment,
        basis,
        cbc_chain: *cfg.cipher.iv(),
        superblock_index: 0,
    })
}

/// Encrypts one plaintext superblock and emits exactly one packet per
/// available channel, ordered by channel id.
pub fn sender_process_superblock(
    st: &mut SessionState,
    cfg: &SetupConfig,
    plaintext: &SuperBlock,
    decoys: &mut Prng,
) -> Result<Vec<ChannelPacket>> {
    if st.role != Role::Sender {
        return Err(Error::BadParameters(
            "session does not belong to a sender".into(),
        ));
    }
    if plaintext.0.len() != cfg.superblock_bytes() {
        return Err(Error::BadLength(format!(
            "superblock is {} bytes, config needs {}",
            plaintext.0.len(),
            cfg.superblock_bytes()
        )));
    }
    let ciphertext = cfg
        .cipher
        .encrypt_superblock(plaintext, &mut st.cbc_chain)?;
    let residues = crt_split(&ciphertext.to_natural(), &st.basis)?;
    let widths = cfg.cell_widths();

    let mut payloads: Vec<Option<Vec<u8>>> = vec![None; usize::from(cfg.available)];
    for (channel, residue) in st.assignment.selected().iter().zip(residues.residues()) {
        payloads[channel.index()] = Some(encode_residue(residue, widths[channel.index()])?);
    }
    let packets = payloads
        .into_iter()
        .enumerate()
        .map(|(id, payload)| {
            let channel = ChannelId(id as u16);
            match payload {
                Some(payload) => ChannelPacket {
                    channel,
                    payload,
                    kind: Some(PacketKind::Real),
                },
                None => ChannelPacket {
                    channel,
                    payload: gen_decoy(decoys, widths[id]),
                    kind: Some(PacketKind::Decoy),
                },
            }
        })
        .collect();
    st.superblock_index += 1;
    Ok(packets)
}

/// Rebuilds and decrypts one superblock from the selected channels'
/// packets; packets on other channels are ignored.
pub fn receiver_process_packets(
    st: &mut SessionState,
    cfg: &SetupConfig,
    packets: &[ChannelPacket],
) -> Result<SuperBlock> {
    if st.role != Role::Receiver {
        return Err(Error::BadParameters(
            "session does not belong to a receiver".into(),
        ));
    }
    let widths = cfg.cell_widths();
    let mut residues = Vec::with_capacity(st.basis.len());
    for (k, &channel) in st.assignment.selected().iter().enumerate() {
        let packet = packets
            .iter()
            .find(|p| p.channel == channel)
            .ok_or(Error::MissingChannel(channel.0))?;
        let width = widths[channel.index()];
        if packet.payload.len() != width {
            return Err(Error::BadWidth {
                expected: width,
                actual: packet.payload.len(),
            });
        }
        let residue = decode_residue(&packet.payload);
        if residue >= st.basis.moduli()[k] {
            return Err(Error::ResidueOutOfRange { index: k });
        }
        residues.push(residue);
    }
    let combined = crt_combine(&ResidueVector(residues), &st.basis)?;
    let bits = cfg.superblock_bits();
    if combined.bits() > bits {
        return Err(Error::Overflow { bits });
    }
    let ciphertext = SuperBlock::from_natural(&combined, bits)?;
    let plaintext = cfg
        .cipher
        .decrypt_superblock(&ciphertext, &mut st.cbc_chain)?;
    st.superblock_index += 1;
    Ok(plaintext)
}

/// Fixed-width big-endian cell for a residue.
pub fn encode_residue(r: &Natural, width: usize) -> Result<Vec<u8>> {
    to_fixed_be(r, width)
}

pub fn decode_residue(bytes: &[u8]) -> Natural {
    Natural::from_bytes_be(bytes)
}

/// `width` uniformly random bytes.
pub fn gen_decoy(prng: &mut Prng, width: usize) -> Vec<u8> {
    let mut out = vec![0u8; width];
    prng.fill_bytes(&mut out);
    out
}

/// Sender side of the session loop; starts a new session automatically
/// every `superblocks_per_session` superblocks.
#[derive(Debug, Clone)]
pub struct Sender {
    cfg: SetupConfig,
    channels: Prng,
    decoys: Prng,
    session: Option<SessionState>,
    sessions_started: u64,
}

impl Sender {
    pub fn new(cfg: SetupConfig) -> Self {
        let channels = cfg.channel_prng();
        let decoys = cfg.decoy_prng();
        Sender {
            cfg,
            channels,
            decoys,
            session: None,
            sessions_started: 0,
        }
    }

    /// Replaces the key-derived decoy stream. Decoys need not match the
    /// receiver, which never reads them.
    pub fn with_decoy_seed(mut self, seed: u64) -> Self {
        self.decoys = Prng::for_domain(seed, DECOY_DOMAIN);
        self
    }

    pub fn config(&self) -> &SetupConfig {
        &self.cfg
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.session.as_ref()
    }

    pub fn sessions_started(&self) -> u64 {
        self.sessions_started
    }

    pub fn process_superblock(&mut self, plaintext: &SuperBlock) -> Result<Vec<ChannelPacket>> {
        let st = current_session(
            &mut self.session,
            &self.cfg,
            &mut self.channels,
            &mut self.sessions_started,
            Role::Sender,
        )?;
        sender_process_superblock(st, &self.cfg, plaintext, &mut self.decoys)
    }
}

/// Receiver side of the session loop, mirroring [`Sender`].
#[derive(Debug, Clone)]
pub struct Receiver {
    cfg: SetupConfig,
    channels: Prng,
    session: Option<SessionState>,
    sessions_started: u64,
}

impl Receiver {
    pub fn new(cfg: SetupConfig) -> Self {
        let channels = cfg.channel_prng();
        Receiver {
            cfg,
            channels,
            session: None,
            sessions_started: 0,
        }
    }

    pub fn config(&self) -> &SetupConfig {
        &self.cfg
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.session.as_ref()
    }

    pub fn sessions_started(&self) -> u64 {
        self.sessions_started
    }

    /// Channels that will carry the next superblock. Starts a new session
    /// if the current one is exhausted.
    pub fn next_selection(&mut self) -> Result<Vec<ChannelId>> {
        let st = current_session(
            &mut self.session,
            &self.cfg,
            &mut self.channels,
            &mut self.sessions_started,
            Role::Receiver,
        )?;
        Ok(st.selected().to_vec())
    }

    pub fn process_packets(&mut self, packets: &[ChannelPacket]) -> Result<SuperBlock> {
        let st = current_session(
            &mut self.session,
            &self.cfg,
            &mut self.channels,
            &mut self.sessions_started,
            Role::Receiver,
        )?;
        receiver_process_packets(st, &self.cfg, packets)
    }
}

fn current_session<'a>(
    session: &'a mut Option<SessionState>,
    cfg: &SetupConfig,
    prng: &mut Prng,
    started: &mut u64,
    role: Role,
) -> Result<&'a mut SessionState> {
    let exhausted = session
        .as_ref()
        .is_none_or(|st| st.superblock_index >= cfg.superblocks_per_session);
    if exhausted {
        *session = Some(begin_session(cfg, prng, role)?);
        *started += 1;
    }
    Ok(session.as_mut().expect("session was just started"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: [u8; 16] = *b"0123456789abcdef";
    const IV: [u8; 16] = *b"fedcba9876543210";

    fn params(
        available: u16,
        used: u16,
        multiplier: u16,
        mode: AssignmentMode,
    ) -> SetupParams<'static> {
        SetupParams {
            cipher: CipherId::Aes128,
            key: &KEY,
            iv: &IV,
            available,
            used,
            multiplier,
            seed: 42,
            mode,
        }
    }

    fn nat(v: u64) -> Natural {
        Natural::from(v)
    }

    #[test]
    fn setup_dynamic_aes_512() {
        let cfg = setup(&params(16, 10, 4, AssignmentMode::Dynamic)).unwrap();
        assert_eq!(cfg.moduli().len(), 10);
        assert!(cfg.moduli().moduli().iter().all(|q| q.bits() == 53));
        assert!(cfg.moduli().covers(512));
        assert_eq!(cfg.cell_widths(), vec![7; 16]);
    }

    #[test]
    fn setup_static_generates_one_modulus_per_channel() {
        let cfg = setup(&params(16, 10, 4, AssignmentMode::Static)).unwrap();
        assert_eq!(cfg.moduli().len(), 16);
        assert!(cfg.moduli().moduli().iter().all(|q| q.bits() == 53));
    }

    #[test]
    fn setup_rejects_more_used_than_available() {
        assert!(matches!(
            setup(&params(4, 5, 1, AssignmentMode::Dynamic)),
            Err(Error::BadParameters(_))
        ));
        assert!(setup(&params(4, 2, 0, AssignmentMode::Dynamic)).is_err());
        assert!(setup(&params(4, 2, 16, AssignmentMode::Dynamic)).is_err());
    }

    #[test]
    fn static_and_dynamic_agree_when_all_channels_used() {
        let d = setup(&params(6, 6, 1, AssignmentMode::Dynamic)).unwrap();
        let s = setup(&params(6, 6, 1, AssignmentMode::Static)).unwrap();
        let mut dm = d.moduli().moduli().to_vec();
        let mut sm = s.moduli().moduli().to_vec();
        dm.sort();
        sm.sort();
        assert_eq!(dm, sm);
        assert_eq!(d.cell_widths(), s.cell_widths());
    }

    #[test]
    fn first_session_matches_channel_selection() {
        let cfg = setup(&params(16, 10, 4, AssignmentMode::Dynamic)).unwrap();
        let mut prng = cfg.channel_prng();
        let st = begin_session(&cfg, &mut prng, Role::Sender).unwrap();
        let expected = select_channels(&mut Prng::new(42 ^ CHANNEL_DOMAIN), 16, 10).unwrap();
        assert_eq!(st.selected(), expected.as_slice());
        assert_eq!(st.cbc_chain(), &IV);
        assert_eq!(st.superblock_index(), 0);

        let next = begin_session(&cfg, &mut prng, Role::Sender).unwrap();
        assert_ne!(next.selected(), st.selected());
    }

    #[test]
    fn roles_agree_from_equal_prng_states() {
        let cfg = setup(&params(8, 3, 2, AssignmentMode::Static)).unwrap();
        let s = begin_session(&cfg, &mut cfg.channel_prng(), Role::Sender).unwrap();
        let r = begin_session(&cfg, &mut cfg.channel_prng(), Role::Receiver).unwrap();
        assert_eq!(s.assignment(), r.assignment());
        assert_eq!(s.session_moduli(), r.session_moduli());
    }

    #[test]
    fn residues_match_independent_mod_oracle() {
        for mode in [AssignmentMode::Dynamic, AssignmentMode::Static] {
            let cfg = setup(&params(12, 10, 1, mode)).unwrap();
            let mut st = begin_session(&cfg, &mut cfg.channel_prng(), Role::Sender).unwrap();
            let pt = SuperBlock((0u8..16).collect());
            let packets = sender_process_superblock(&mut st, &cfg, &pt, &mut Prng::new(1)).unwrap();
            assert_eq!(packets.len(), 12);

            let ct = cfg
                .cipher()
                .encrypt_superblock(&pt, &mut IV.clone())
                .unwrap();
            // long division over bytes, independent of the bigint path
            let rem = |q: u64| {
                ct.0.iter()
                    .fold(0u64, |acc, &b| (acc * 256 + u64::from(b)) % q)
            };
            for packet in &packets {
                match st.assignment().modulus_of(packet.channel) {
                    Some(i) => {
                        let q: u64 = cfg.moduli().moduli()[i].clone().try_into().unwrap();
                        assert_eq!(decode_residue(&packet.payload), nat(rem(q)));
                        assert_eq!(packet.kind, Some(PacketKind::Real));
                    }
                    None => assert_eq!(packet.kind, Some(PacketKind::Decoy)),
                }
            }
        }
    }

    #[test]
    fn no_decoys_when_every_channel_is_used() {
        let cfg = setup(&params(10, 10, 1, AssignmentMode::Dynamic)).unwrap();
        let mut sender = Sender::new(cfg.clone());
        let packets = sender.process_superblock(&SuperBlock(vec![9; 16])).unwrap();
        assert!(packets.iter().all(|p| p.kind == Some(PacketKind::Real)));
    }

    #[test]
    fn superblock_round_trip_across_sessions() {
        for mode in [AssignmentMode::Dynamic, AssignmentMode::Static] {
            let cfg = setup(&params(16, 10, 4, mode))
                .unwrap()
                .with_superblocks_per_session(3)
                .unwrap();
            let mut sender = Sender::new(cfg.clone());
            let mut receiver = Receiver::new(cfg.clone());
            for i in 0..10u8 {
                let pt = SuperBlock((0..64).map(|j| j ^ i).collect());
                let packets = sender.process_superblock(&pt).unwrap();
                let wire: Vec<ChannelPacket> = packets
                    .into_iter()
                    .map(|p| ChannelPacket::received(p.channel, p.payload))
                    .collect();
                assert_eq!(receiver.process_packets(&wire).unwrap(), pt);
            }
            assert_eq!(sender.sessions_started(), 4);
            assert_eq!(receiver.sessions_started(), 4);
        }
    }

    fn one_round(cfg: &SetupConfig) -> (SessionState, Vec<ChannelPacket>) {
        let mut st = begin_session(cfg, &mut cfg.channel_prng(), Role::Sender).unwrap();
        let pt = SuperBlock(vec![0x5a; cfg.superblock_bytes()]);
        let packets = sender_process_superblock(&mut st, cfg, &pt, &mut cfg.decoy_prng()).unwrap();
        let rx = begin_session(cfg, &mut cfg.channel_prng(), Role::Receiver).unwrap();
        (rx, packets)
    }

    #[test]
    fn tampered_residue_is_out_of_range() {
        let cfg = setup(&params(16, 10, 1, AssignmentMode::Dynamic)).unwrap();
        let (mut rx, mut packets) = one_round(&cfg);
        let victim = rx.selected()[0];
        packets[victim.index()].payload = vec![0xff; 2];
        assert!(matches!(
            receiver_process_packets(&mut rx, &cfg, &packets),
            Err(Error::ResidueOutOfRange { index: 0 })
        ));
    }

    #[test]
    fn missing_selected_channel() {
        let cfg = setup(&params(16, 10, 1, AssignmentMode::Dynamic)).unwrap();
        let (mut rx, packets) = one_round(&cfg);
        let victim = rx.selected()[3];
        let without: Vec<_> = packets
            .into_iter()
            .filter(|p| p.channel != victim)
            .collect();
        assert!(matches!(
            receiver_process_packets(&mut rx, &cfg, &without),
            Err(Error::MissingChannel(c)) if c == victim.0
        ));
    }

    #[test]
    fn combined_value_above_superblock_overflows() {
        let cfg = setup(&params(10, 10, 1, AssignmentMode::Dynamic)).unwrap();
        let (mut rx, mut packets) = one_round(&cfg);
        // residues of product - 1 are all q_i - 1, a valid vector above 2^N
        let widths = cfg.cell_widths();
        for (k, ch) in rx.selected().to_vec().into_iter().enumerate() {
            let q = &rx.session_moduli().moduli()[k];
            packets[ch.index()].payload = encode_residue(&(q - 1u32), widths[ch.index()]).unwrap();
        }
        assert!(matches!(
            receiver_process_packets(&mut rx, &cfg, &packets),
            Err(Error::Overflow { bits: 128 })
        ));
    }

    #[test]
    fn zero_residues_decrypt_without_error() {
        let cfg = setup(&params(12, 10, 1, AssignmentMode::Dynamic)).unwrap();
        let (mut rx, mut packets) = one_round(&cfg);
        for p in &mut packets {
            p.payload.iter_mut().for_each(|b| *b = 0);
        }
        let pt = receiver_process_packets(&mut rx, &cfg, &packets).unwrap();
        let mut expected = [0u8; 16];
        cfg.cipher().decrypt_block(&mut expected);
        let expected: Vec<u8> = expected.iter().zip(IV).map(|(a, b)| a ^ b).collect();
        assert_eq!(pt.0, expected);
    }

    #[test]
    fn residue_encoding_examples() {
        assert_eq!(encode_residue(&nat(13), 2).unwrap(), vec![0x00, 0x0d]);
        assert_eq!(encode_residue(&nat(0), 7).unwrap(), vec![0; 7]);
        assert_eq!(
            encode_residue(&nat((1 << 52) - 1), 7).unwrap(),
            vec![0x0f, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff]
        );
        assert!(matches!(
            encode_residue(&nat(256), 1),
            Err(Error::Overflow { bits: 8 })
        ));
        assert_eq!(decode_residue(&[0x00, 0x0d]), nat(13));
    }

    #[test]
    fn decoy_widths_and_uniformity() {
        assert!(gen_decoy(&mut Prng::new(0), 0).is_empty());
        // chi-square over byte values, 255 dof; 0.999 quantile is 330.52
        let mut prng = Prng::new(DECOY_DOMAIN ^ 42);
        let mut counts = [0u64; 256];
        let mut n = 0u64;
        for _ in 0..100_000 {
            for b in gen_decoy(&mut prng, 7) {
                counts[usize::from(b)] += 1;
                n += 1;
            }
        }
        let expected = n as f64 / 256.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 330.52, "chi2 = {chi2}");
    }

    #[test]
    fn decoys_differ_only_off_selection() {
        let cfg = setup(&params(16, 10, 2, AssignmentMode::Dynamic)).unwrap();
        let mut a = Sender::new(cfg.clone()).with_decoy_seed(1);
        let mut b = Sender::new(cfg.clone()).with_decoy_seed(2);
        let pt = SuperBlock(vec![1; 32]);
        let pa = a.process_superblock(&pt).unwrap();
        let pb = b.process_superblock(&pt).unwrap();
        let selected = a.session().unwrap().assignment().clone();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.payload.len(), y.payload.len());
            if selected.is_selected(x.channel) {
                assert_eq!(x.payload, y.payload);
            } else {
                assert_ne!(x.payload, y.payload);
            }
        }
    }

    #[test]
    fn roles_are_enforced() {
        let cfg = setup(&params(4, 2, 1, AssignmentMode::Dynamic)).unwrap();
        let mut rx = begin_session(&cfg, &mut cfg.channel_prng(), Role::Receiver).unwrap();
        assert!(sender_process_superblock(
            &mut rx,
            &cfg,
            &SuperBlock(vec![0; 16]),
            &mut Prng::new(0)
        )
        .is_err());
    }
}
