//! Channelization, the (primary, max bandwidth) action space, dynamic channel
//! bonding, and bandwidth-dependent overlap between access points.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of one basic channel.
pub const BASIC_CHANNEL_MHZ: u32 = 20;

/// Largest supported number of basic channels (the channel set is a `u32` mask).
pub const MAX_CHANNELS: usize = 32;

pub(crate) fn check_channel_count(n_channels: usize) -> Result<()> {
    if n_channels == 0 || !n_channels.is_power_of_two() || n_channels > MAX_CHANNELS {
        return Err(Error::validation(format!(
            "n_channels must be a power of two in 1..={MAX_CHANNELS}, got {n_channels}"
        )));
    }
    Ok(())
}

/// A spectrum configuration: the primary channel where backoff runs and the
/// maximum number of basic channels that may be bonded to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    /// 1-based basic channel index.
    pub primary: usize,
    /// Bandwidth cap in basic channels (power of two).
    pub max_bandwidth: usize,
}

impl Action {
    pub fn new(primary: usize, max_bandwidth: usize) -> Self {
        Action {
            primary,
            max_bandwidth,
        }
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        check_channel_count(n_channels)?;
        if self.primary == 0 || self.primary > n_channels {
            return Err(Error::validation(format!(
                "primary channel {} outside 1..={n_channels}",
                self.primary
            )));
        }
        if !self.max_bandwidth.is_power_of_two() || self.max_bandwidth > n_channels {
            return Err(Error::validation(format!(
                "max bandwidth {} is not a power of two <= {n_channels}",
                self.max_bandwidth
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, b={})", self.primary, self.max_bandwidth)
    }
}

/// Set of 1-based basic channels, stored as a bit mask (bit `c - 1` is channel `c`).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ChannelSet(u32);

impl ChannelSet {
    pub const EMPTY: ChannelSet = ChannelSet(0);

    pub fn from_bits(bits: u32) -> Self {
        ChannelSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// All channels `1..=n_channels`.
    pub fn full(n_channels: usize) -> Self {
        if n_channels >= 32 {
            ChannelSet(u32::MAX)
        } else {
            ChannelSet((1u32 << n_channels) - 1)
        }
    }

    /// Contiguous run `start..start + width` (1-based).
    pub fn range(start: usize, width: usize) -> Self {
        let run = if width >= 32 {
            u32::MAX
        } else {
            (1u32 << width) - 1
        };
        ChannelSet(run << (start - 1))
    }

    pub fn contains(self, channel: usize) -> bool {
        channel >= 1 && channel <= 32 && self.0 & (1 << (channel - 1)) != 0
    }

    pub fn insert(&mut self, channel: usize) {
        self.0 |= 1 << (channel - 1);
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: ChannelSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: ChannelSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn union(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 | other.0)
    }

    pub fn difference(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 & !other.0)
    }

    /// Channels in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (1..=32).filter(move |&c| self.contains(c))
    }

    pub fn bandwidth_mhz(self) -> u32 {
        self.len() as u32 * BASIC_CHANNEL_MHZ
    }
}

impl FromIterator<usize> for ChannelSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = ChannelSet::EMPTY;
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl fmt::Debug for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for ChannelSet {
    /// Channels joined by `-`, e.g. `1-2`; empty prints as `-`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let parts: Vec<String> = self.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// The per-BSS action space for a system of `n_channels` basic channels.
///
/// Arms are numbered bandwidth-major: `index = log2(b) * n_channels + (p - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionSpace {
    n_channels: usize,
}

impl ActionSpace {
    pub fn new(n_channels: usize) -> Result<Self> {
        check_channel_count(n_channels)?;
        Ok(ActionSpace { n_channels })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_widths(&self) -> usize {
        self.n_channels.trailing_zeros() as usize + 1
    }

    pub fn len(&self) -> usize {
        self.n_channels * self.n_widths()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, action: Action) -> Result<usize> {
        action.validate(self.n_channels)?;
        Ok(action.max_bandwidth.trailing_zeros() as usize * self.n_channels + action.primary - 1)
    }

    pub fn action(&self, index: usize) -> Result<Action> {
        if index >= self.len() {
            return Err(Error::validation(format!(
                "action index {index} outside 0..{}",
                self.len()
            )));
        }
        Ok(Action {
            primary: index % self.n_channels + 1,
            max_bandwidth: 1 << (index / self.n_channels),
        })
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.len()).map(move |i| self.action(i).expect("index in range"))
    }
}

/// Every (primary, max bandwidth) pair, ordered by bandwidth then primary.
pub fn enumerate_actions(n_channels: usize) -> Result<Vec<Action>> {
    let space = ActionSpace::new(n_channels)?;
    Ok(space.actions().collect())
}

pub fn action_index(action: Action, n_channels: usize) -> Result<usize> {
    ActionSpace::new(n_channels)?.index(action)
}

pub fn action_from_index(index: usize, n_channels: usize) -> Result<Action> {
    ActionSpace::new(n_channels)?.action(index)
}

/// The aligned block of `width` channels that contains `primary`.
pub fn allowed_block(primary: usize, width: usize) -> ChannelSet {
    let start = (primary - 1) / width * width + 1;
    ChannelSet::range(start, width)
}

/// Dynamic channel bonding: the widest aligned block around `primary`, no
/// wider than `max_bandwidth`, whose channels are all idle. Empty when the
/// primary itself is busy.
pub fn dcb_select(primary: usize, max_bandwidth: usize, idle: ChannelSet) -> ChannelSet {
    if !idle.contains(primary) {
        return ChannelSet::EMPTY;
    }
    let mut width = max_bandwidth;
    while width > 1 {
        let block = allowed_block(primary, width);
        if block.is_subset(idle) {
            return block;
        }
        width /= 2;
    }
    allowed_block(primary, 1)
}

/// Symmetric AP-AP matrix of the widest transmission bandwidth (MHz) at which
/// two APs still sense each other. Zero means they never overlap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceMatrix {
    entries: Vec<Vec<u32>>,
}

impl InterferenceMatrix {
    pub fn new(entries: Vec<Vec<u32>>) -> Result<Self> {
        let n = entries.len();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "interference matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 0 {
                return Err(Error::validation(format!(
                    "interference matrix diagonal entry {i} must be 0"
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v % BASIC_CHANNEL_MHZ != 0 {
                    return Err(Error::validation(format!(
                        "interference matrix entry [{i}][{j}] = {v} is not a multiple of {BASIC_CHANNEL_MHZ} MHz"
                    )));
                }
                if v != entries[j][i] {
                    return Err(Error::validation(format!(
                        "interference matrix is not symmetric at [{i}][{j}]"
                    )));
                }
            }
        }
        Ok(InterferenceMatrix { entries })
    }

    pub fn zeros(n: usize) -> Self {
        InterferenceMatrix {
            entries: vec![vec![0; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.entries
    }

    /// Unchecked overlap predicate for hot loops; `i == j` is never an overlap.
    #[inline]
    pub fn reaches(&self, i: usize, j: usize, tx_bandwidth_mhz: u32) -> bool {
        i != j && tx_bandwidth_mhz <= self.entries[i][j]
    }

    /// Restricts the matrix to the given BSS indices, in order.
    pub fn select(&self, keep: &[usize]) -> Self {
        InterferenceMatrix {
            entries: keep
                .iter()
                .map(|&i| keep.iter().map(|&j| self.entries[i][j]).collect())
                .collect(),
        }
    }
}

/// Whether a transmission of `tx_bandwidth_mhz` by one AP of the pair is
/// sensed by the other.
pub fn overlaps(i: usize, j: usize, tx_bandwidth_mhz: u32, m: &InterferenceMatrix) -> Result<bool> {
    if i == j {
        return Err(Error::validation("overlap is undefined for a BSS with itself"));
    }
    if i >= m.len() || j >= m.len() {
        return Err(Error::validation(format!(
            "BSS index out of range for {}x{} matrix",
            m.len(),
            m.len()
        )));
    }
    if tx_bandwidth_mhz % BASIC_CHANNEL_MHZ != 0 {
        return Err(Error::validation(format!(
            "transmission bandwidth {tx_bandwidth_mhz} MHz is not a multiple of {BASIC_CHANNEL_MHZ}"
        )));
    }
    Ok(m.reaches(i, j, tx_bandwidth_mhz))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(chs: &[usize]) -> ChannelSet {
        chs.iter().copied().collect()
    }

    #[test]
    fn action_space_sizes() {
        assert_eq!(enumerate_actions(4).unwrap().len(), 12);
        assert_eq!(enumerate_actions(1).unwrap(), vec![Action::new(1, 1)]);
        assert_eq!(enumerate_actions(8).unwrap().len(), 32);
        assert!(enumerate_actions(3).is_err());
        assert!(enumerate_actions(0).is_err());
    }

    #[test]
    fn ordering_is_bandwidth_major() {
        let acts = enumerate_actions(4).unwrap();
        assert_eq!(acts[0], Action::new(1, 1));
        assert_eq!(acts[3], Action::new(4, 1));
        assert_eq!(acts[4], Action::new(1, 2));
        assert_eq!(acts[11], Action::new(4, 4));
    }

    #[test]
    fn index_examples() {
        assert_eq!(action_index(Action::new(1, 1), 4).unwrap(), 0);
        assert_eq!(action_index(Action::new(3, 2), 4).unwrap(), 6);
        assert_eq!(action_from_index(11, 4).unwrap(), Action::new(4, 4));
        assert!(action_from_index(12, 4).is_err());
        assert!(action_index(Action::new(5, 1), 4).is_err());
        assert!(action_index(Action::new(1, 3), 4).is_err());
        assert!(action_index(Action::new(1, 8), 4).is_err());
    }

    #[test]
    fn index_round_trip_exhaustive() {
        for c in [1, 2, 4, 8, 16, 32] {
            let space = ActionSpace::new(c).unwrap();
            assert_eq!(space.len(), c * (c.trailing_zeros() as usize + 1));
            for i in 0..space.len() {
                let a = space.action(i).unwrap();
                assert_eq!(space.index(a).unwrap(), i);
            }
        }
    }

    #[test]
    fn blocks() {
        assert_eq!(allowed_block(3, 2), set(&[3, 4]));
        assert_eq!(allowed_block(1, 4), set(&[1, 2, 3, 4]));
        assert_eq!(allowed_block(2, 1), set(&[2]));
        assert_eq!(allowed_block(2, 2), set(&[1, 2]));
        assert_eq!(allowed_block(7, 4), set(&[5, 6, 7, 8]));
    }

    #[test]
    fn dcb_examples() {
        assert_eq!(dcb_select(1, 4, set(&[1, 2, 3, 4])), set(&[1, 2, 3, 4]));
        assert_eq!(dcb_select(1, 4, set(&[1, 2, 4])), set(&[1, 2]));
        assert_eq!(dcb_select(1, 4, set(&[2, 3, 4])), ChannelSet::EMPTY);
        assert_eq!(dcb_select(1, 1, set(&[1, 2, 3, 4])), set(&[1]));
        assert_eq!(dcb_select(4, 4, set(&[3, 4])), set(&[3, 4]));
        assert_eq!(dcb_select(3, 2, set(&[2, 3])), set(&[3]));
    }

    /// Widest power-of-two run of channels that starts on a multiple of its
    /// width, holds the primary, fits under `max_bw`, and is entirely idle.
    fn brute_dcb(primary: usize, max_bw: usize, idle: &[bool], n: usize) -> Vec<usize> {
        let mut best: Vec<usize> = vec![];
        for start in 1..=n {
            for width in 1..=max_bw {
                if !width.is_power_of_two() || (start - 1) % width != 0 || start + width - 1 > n {
                    continue;
                }
                let chans: Vec<usize> = (start..start + width).collect();
                if chans.contains(&primary) && chans.iter().all(|&c| idle[c - 1]) && chans.len() > best.len() {
                    best = chans;
                }
            }
        }
        best
    }

    #[test]
    fn dcb_matches_brute_force() {
        for n in [4usize, 8] {
            for mask in 0u32..(1 << n) {
                let idle: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let idle_set: ChannelSet = (1..=n).filter(|&c| idle[c - 1]).collect();
                for a in enumerate_actions(n).unwrap() {
                    let got: Vec<usize> = dcb_select(a.primary, a.max_bandwidth, idle_set).iter().collect();
                    assert_eq!(got, brute_dcb(a.primary, a.max_bandwidth, &idle, n), "{a} idle {idle_set}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn dcb_result_is_idle_and_holds_primary(bits in 0u32..256, p in 1usize..=8, k in 0u32..4) {
            let idle = ChannelSet::from_bits(bits);
            let b = 1usize << k;
            let got = dcb_select(p, b, idle);
            proptest::prop_assert!(got.is_subset(idle));
            proptest::prop_assert_eq!(got.is_empty(), !idle.contains(p));
            if !got.is_empty() {
                proptest::prop_assert!(got.contains(p) && got.len() <= b && got.len().is_power_of_two());
            }
        }
    }

    #[test]
    fn stated_pairwise_overlaps() {
        // A, B, C, D with A-B = 40, A-C = 20, A-D = 80.
        let m = InterferenceMatrix::new(vec![
            vec![0, 40, 20, 80],
            vec![40, 0, 0, 0],
            vec![20, 0, 0, 0],
            vec![80, 0, 0, 0],
        ])
        .unwrap();
        assert!(overlaps(0, 2, 20, &m).unwrap());
        assert!(!overlaps(0, 2, 40, &m).unwrap());
        assert!(overlaps(0, 3, 80, &m).unwrap());
        assert!(overlaps(0, 1, 40, &m).unwrap());
        assert!(!overlaps(0, 1, 80, &m).unwrap());
        assert!(overlaps(0, 0, 20, &m).is_err());
        assert!(overlaps(0, 1, 30, &m).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(InterferenceMatrix::new(vec![vec![0, 20], vec![40, 0]]).is_err());
        assert!(InterferenceMatrix::new(vec![vec![20, 0], vec![0, 0]]).is_err());
        assert!(InterferenceMatrix::new(vec![vec![0, 30], vec![30, 0]]).is_err());
        assert!(InterferenceMatrix::new(vec![vec![0, 20]]).is_err());
    }

    #[test]
    fn channel_set_display() {
        assert_eq!(set(&[1, 2]).to_string(), "1-2");
        assert_eq!(ChannelSet::EMPTY.to_string(), "-");
    }
}
