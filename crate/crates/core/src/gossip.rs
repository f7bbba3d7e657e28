//! Max-consensus gossip of zone occupancy.
//!
//! Every agent keeps, for each recent time `τ`, a binary estimate of whether
//! each zone was occupied at `τ`. The estimate starts as the agent's own
//! indicator and then, once per tick, becomes the maximum over the agent and
//! its neighbours' previous-tick estimates. After `d >= diameter` rounds the
//! estimate equals the global occupancy and never changes again, so it leaves
//! the active window and is folded into a per-rollout count.
//!
//! A table at clock `t` holds estimates for `τ` in `(t - d - 1, t]`. The slot
//! for `τ` receives its last exchange at tick `τ + d` and is finalized when
//! the slot for `τ + d + 1` is created.

use std::collections::{BTreeMap, VecDeque};

use crate::env::{local_occupancy, occupancy, Coord, WorldState, ZoneSpec};
use crate::error::{CodecError, ContractViolation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EstimateTable {
    agent: usize,
    n_zones: usize,
    retention: usize,
    t_zero: u64,
    clock: Option<u64>,
    /// Front is the oldest active `τ`; back is `τ = clock`.
    window: VecDeque<Vec<bool>>,
    /// Rollout index -> per-zone count of finalized estimates equal to 1.
    finalized: BTreeMap<u64, Vec<u64>>,
}

impl EstimateTable {
    /// `retention` is the diameter overestimate `d`; `t_zero` is the rollout
    /// length used to bucket finalized estimates.
    pub fn new(agent: usize, n_zones: usize, retention: usize, t_zero: u64) -> Self {
        assert!(t_zero >= 1, "rollout length must be positive");
        EstimateTable {
            agent,
            n_zones,
            retention,
            t_zero,
            clock: None,
            window: VecDeque::with_capacity(retention + 2),
            finalized: BTreeMap::new(),
        }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn n_zones(&self) -> usize {
        self.n_zones
    }

    pub fn retention(&self) -> usize {
        self.retention
    }

    pub fn t_zero(&self) -> u64 {
        self.t_zero
    }

    pub fn clock(&self) -> Option<u64> {
        self.clock
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// `τ` of the oldest active slot.
    pub fn window_start(&self) -> Option<u64> {
        self.clock.map(|t| t + 1 - self.window.len() as u64)
    }

    /// Active slots as `(τ, estimates)`, oldest first.
    pub fn window(&self) -> impl Iterator<Item = (u64, &[bool])> + '_ {
        let start = self.window_start().unwrap_or(0);
        self.window
            .iter()
            .enumerate()
            .map(move |(i, v)| (start + i as u64, v.as_slice()))
    }

    /// Active estimate for time `tau`, if it is still in the window.
    pub fn estimate(&self, tau: u64) -> Option<&[bool]> {
        let start = self.window_start()?;
        let idx = tau.checked_sub(start)? as usize;
        self.window.get(idx).map(Vec::as_slice)
    }

    /// Per-zone count of finalized estimates equal to one in rollout `k`.
    pub fn finalized_counts(&self, rollout: u64) -> Option<&[u64]> {
        self.finalized.get(&rollout).map(Vec::as_slice)
    }

    /// Finalized plus active estimates with `τ` in rollout `k`, per zone.
    pub fn rollout_counts(&self, rollout: u64) -> Vec<u64> {
        let mut counts = self
            .finalized
            .get(&rollout)
            .cloned()
            .unwrap_or_else(|| vec![0; self.n_zones]);
        for (tau, est) in self.window() {
            if tau / self.t_zero == rollout {
                for (c, &e) in counts.iter_mut().zip(est) {
                    *c += u64::from(e);
                }
            }
        }
        counts
    }

    /// Drops finalized counts of rollouts before `k`.
    pub fn discard_before(&mut self, rollout: u64) {
        self.finalized = self.finalized.split_off(&rollout);
    }

    /// Opens the slot for `τ = t` with the agent's own zone indicators.
    pub fn init_slot(
        &mut self,
        t: u64,
        position: Coord,
        zones: &[ZoneSpec],
    ) -> Result<(), ContractViolation> {
        self.init_slot_with(t, local_occupancy(position, zones))
    }

    /// As [`init_slot`](Self::init_slot), with the indicator vector given directly.
    pub fn init_slot_with(&mut self, t: u64, local: Vec<bool>) -> Result<(), ContractViolation> {
        assert_eq!(
            local.len(),
            self.n_zones,
            "indicator length must equal the zone count"
        );
        match self.clock {
            Some(c) if c == t => {
                return Err(ContractViolation::DoubleInit {
                    agent: self.agent,
                    t,
                });
            }
            Some(c) if c + 1 != t => {
                return Err(ContractViolation::ClockSkip {
                    agent: self.agent,
                    expected: c + 1,
                    got: t,
                });
            }
            _ => {}
        }
        self.clock = Some(t);
        self.window.push_back(local);
        if self.window.len() > self.retention + 1 {
            let tau = t + 1 - self.window.len() as u64;
            let done = self.window.pop_front().expect("window is non-empty");
            let bucket = self
                .finalized
                .entry(tau / self.t_zero)
                .or_insert_with(|| vec![0; self.n_zones]);
            for (c, e) in bucket.iter_mut().zip(done) {
                *c += u64::from(e);
            }
        }
        Ok(())
    }
}

/// One synchronous exchange over `usable_edges`.
///
/// Every non-newest slot becomes the max over the agent and its usable
/// neighbours of their values before this round. All reads come from a
/// snapshot taken before any write, so the result does not depend on the
/// order agents are visited in. Newly opened slots (`τ = t`) are left alone.
pub fn gossip_round(
    tables: &mut [EstimateTable],
    usable_edges: &[(usize, usize)],
) -> Result<(), ContractViolation> {
    let Some(first) = tables.first() else {
        return Ok(());
    };
    let clock = first.clock.ok_or_else(|| {
        ContractViolation::Other("gossip round before any slot was initialized".into())
    })?;
    for tb in tables.iter() {
        let c = tb.clock.unwrap_or(u64::MAX);
        if c != clock {
            return Err(ContractViolation::ClockMismatch(clock, c));
        }
        if tb.window.len() != first.window.len() {
            return Err(ContractViolation::Other(format!(
                "agent {} holds {} slots, agent {} holds {}",
                tb.agent,
                tb.window.len(),
                first.agent,
                first.window.len()
            )));
        }
    }

    let mut neighbors = vec![Vec::new(); tables.len()];
    for &(a, b) in usable_edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }

    // Phase one reads only; phase two writes.
    let exchanged = first.window.len().saturating_sub(1);
    let m = first.n_zones;
    let stride = exchanged * m;
    let mut next = vec![false; tables.len() * stride];
    for (n, out) in next
        .chunks_mut(stride.max(1))
        .enumerate()
        .take(tables.len())
    {
        for p in std::iter::once(n).chain(neighbors[n].iter().copied()) {
            for (i, slot) in tables[p].window.iter().take(exchanged).enumerate() {
                for (mine, &v) in out[i * m..(i + 1) * m].iter_mut().zip(slot) {
                    *mine |= v;
                }
            }
        }
    }
    for (table, new) in tables.iter_mut().zip(next.chunks(stride.max(1))) {
        for (i, slot) in table.window.iter_mut().take(exchanged).enumerate() {
            slot.copy_from_slice(&new[i * m..(i + 1) * m]);
        }
    }
    Ok(())
}

/// Ground-truth occupancy for every logged state. Centralized; for checks only.
pub fn consensus_oracle(history: &[WorldState], zones: &[ZoneSpec]) -> Vec<Vec<bool>> {
    history.iter().map(|s| occupancy(s, zones)).collect()
}

/// Canonical encoding of one agent's active window.
///
/// Byte layout, integers little-endian:
///
/// | offset | size | field        |
/// |--------|------|--------------|
/// | 0      | 4    | `sender`     |
/// | 4      | 8    | `time`       |
/// | 12     | 2    | `window_len` |
/// | 14     | 2    | `n_zones`    |
/// | 16     | ..   | `payload`    |
///
/// The payload packs estimate `(i, m)` (slot `i`, oldest first, zone `m`) at
/// bit index `i * n_zones + m`, least significant bit first within each byte,
/// zero-padded to a whole byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GossipMessage {
    pub sender: u32,
    pub time: u64,
    pub window_len: u16,
    pub n_zones: u16,
    pub payload: Vec<u8>,
}

pub const HEADER_LEN: usize = 16;

/// Window contents recovered from a message. Slot `i` holds estimates for
/// `τ = time + 1 - window_len + i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedWindow {
    pub sender: u32,
    pub time: u64,
    pub slots: Vec<Vec<bool>>,
}

fn payload_len(window_len: u16, n_zones: u16) -> usize {
    (window_len as usize * n_zones as usize).div_ceil(8)
}

impl GossipMessage {
    pub fn pack(sender: u32, time: u64, slots: &[Vec<bool>]) -> Self {
        let n_zones = slots.first().map_or(0, Vec::len);
        let window_len = u16::try_from(slots.len()).expect("window length fits in u16");
        let n_zones = u16::try_from(n_zones).expect("zone count fits in u16");
        let mut payload = vec![0u8; payload_len(window_len, n_zones)];
        for (bit, v) in slots.iter().flatten().enumerate() {
            if *v {
                payload[bit / 8] |= 1 << (bit % 8);
            }
        }
        GossipMessage {
            sender,
            time,
            window_len,
            n_zones,
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&self.window_len.to_le_bytes());
        out.extend_from_slice(&self.n_zones.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Truncated {
                need: HEADER_LEN,
                have: bytes.len(),
            });
        }
        let sender = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let time = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
        let window_len = u16::from_le_bytes(bytes[12..14].try_into().unwrap());
        let n_zones = u16::from_le_bytes(bytes[14..16].try_into().unwrap());
        let msg = GossipMessage {
            sender,
            time,
            window_len,
            n_zones,
            payload: bytes[HEADER_LEN..].to_vec(),
        };
        msg.check_payload()?;
        Ok(msg)
    }

    fn check_payload(&self) -> Result<(), CodecError> {
        let expected = payload_len(self.window_len, self.n_zones);
        if self.payload.len() != expected {
            return Err(CodecError::PayloadLength {
                expected,
                got: self.payload.len(),
                window_len: self.window_len,
                n_zones: self.n_zones,
            });
        }
        Ok(())
    }
}

/// Encodes `table`'s active window.
pub fn encode_message(table: &EstimateTable) -> GossipMessage {
    let slots: Vec<Vec<bool>> = table.window.iter().cloned().collect();
    let mut msg = GossipMessage::pack(table.agent as u32, table.clock.unwrap_or(0), &slots);
    msg.n_zones = table.n_zones as u16;
    msg
}

pub fn decode_message(msg: &GossipMessage) -> Result<DecodedWindow, CodecError> {
    msg.check_payload()?;
    let m = msg.n_zones as usize;
    let slots = (0..msg.window_len as usize)
        .map(|i| {
            (0..m)
                .map(|z| {
                    let bit = i * m + z;
                    msg.payload[bit / 8] >> (bit % 8) & 1 == 1
                })
                .collect()
        })
        .collect();
    Ok(DecodedWindow {
        sender: msg.sender,
        time: msg.time,
        slots,
    })
}
