//! A coded caching round driven by an array: split files into F packets,
//! fill caches from the stars, broadcast one XOR per integer, decode.
//!
//! The functions here accept any [`Grid`], not only verified PDAs, so a
//! broken array can be run to see where decoding fails.

use std::collections::BTreeMap;
use std::io::Write;

use num_rational::Ratio;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::pda::{Entry, Grid, Pda};

/// Default packet length in bytes.
pub const DEFAULT_PACKET_LEN: usize = 64;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("user {user} cannot decode packet {packet}: {reason}")]
    DecodeError { user: usize, packet: usize, reason: String },
}

/// N files, each split into F packets of equal length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileLibrary {
    n: usize,
    f: usize,
    packet_len: usize,
    packets: Vec<Vec<u8>>,
    padding: Vec<usize>,
}

impl FileLibrary {
    /// Random content from a seed.
    pub fn random(n: usize, f: usize, packet_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let packets = (0..n * f)
            .map(|_| {
                let mut p = vec![0u8; packet_len];
                rng.fill_bytes(&mut p);
                p
            })
            .collect();
        FileLibrary { n, f, packet_len, packets, padding: vec![0; n] }
    }

    /// Splits whole files into F packets, zero-padding every file to a common
    /// length that F divides.
    pub fn from_files(files: &[Vec<u8>], f: usize) -> Result<Self, SimError> {
        if files.is_empty() || f == 0 {
            return Err(SimError::DimensionError("need at least one file and F >= 1".into()));
        }
        let longest = files.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let packet_len = longest.div_ceil(f);
        let mut packets = Vec::with_capacity(files.len() * f);
        let mut padding = Vec::with_capacity(files.len());
        for file in files {
            let mut padded = file.clone();
            padding.push(packet_len * f - file.len());
            padded.resize(packet_len * f, 0);
            packets.extend(padded.chunks(packet_len).map(<[u8]>::to_vec));
        }
        Ok(FileLibrary { n: files.len(), f, packet_len, packets, padding })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    /// Zero bytes appended to `file` when it was split.
    pub fn padding(&self, file: usize) -> usize {
        self.padding[file]
    }

    pub fn packet(&self, file: usize, packet: usize) -> &[u8] {
        &self.packets[file * self.f + packet]
    }

    /// The (padded) file as the concatenation of its packets.
    pub fn file(&self, file: usize) -> Vec<u8> {
        self.packets[file * self.f..(file + 1) * self.f].concat()
    }
}

/// The file index requested by each user, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(demands: Vec<usize>, n_files: usize) -> Result<Self, SimError> {
        if let Some(&d) = demands.iter().find(|&&d| d >= n_files) {
            return Err(SimError::DimensionError(format!("demand {} exceeds N={n_files}", d + 1)));
        }
        Ok(DemandVector(demands))
    }

    /// Uniform i.i.d. requests.
    pub fn random<R: Rng>(k: usize, n_files: usize, rng: &mut R) -> Self {
        DemandVector((0..k).map(|_| rng.gen_range(0..n_files)).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Every demand vector in `[0, n)^k`, in lexicographic order.
pub fn all_demands(k: usize, n: usize) -> impl Iterator<Item = DemandVector> {
    let total = (n as u64).pow(k as u32);
    (0..total).map(move |mut idx| {
        let mut d = vec![0; k];
        for slot in d.iter_mut().rev() {
            *slot = (idx % n as u64) as usize;
            idx /= n as u64;
        }
        DemandVector(d)
    })
}

/// Packets held by one user, keyed by `(file, packet)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cache {
    pub user: usize,
    pub packets: BTreeMap<(usize, usize), Vec<u8>>,
}

impl Cache {
    pub fn get(&self, file: usize, packet: usize) -> Option<&[u8]> {
        self.packets.get(&(file, packet)).map(Vec::as_slice)
    }
}

fn check_dims(grid: &Grid, lib: &FileLibrary) -> Result<(), SimError> {
    if grid.rows() != lib.f() {
        return Err(SimError::DimensionError(format!(
            "array has F={} rows but files have {} packets",
            grid.rows(),
            lib.f()
        )));
    }
    Ok(())
}

/// User `k` caches every file's packet `j` whenever `p[j][k]` is a star.
pub fn place(grid: &Grid, lib: &FileLibrary) -> Result<Vec<Cache>, SimError> {
    check_dims(grid, lib)?;
    Ok((0..grid.cols())
        .map(|user| {
            let mut packets = BTreeMap::new();
            for j in (0..grid.rows()).filter(|&j| grid.get(j, user).is_star()) {
                for i in 0..lib.n() {
                    packets.insert((i, j), lib.packet(i, j).to_vec());
                }
            }
            Cache { user, packets }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Contributor {
    pub user: usize,
    pub file: usize,
    pub packet: usize,
}

/// One coded transmission.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Broadcast {
    pub slot: u32,
    pub payload: Vec<u8>,
    pub contributors: Vec<Contributor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub broadcasts: Vec<Broadcast>,
}

impl Transcript {
    pub fn packets_sent(&self) -> usize {
        self.broadcasts.len()
    }

    fn slot(&self, s: u32) -> Option<&Broadcast> {
        self.broadcasts
            .binary_search_by_key(&s, |b| b.slot)
            .ok()
            .map(|i| &self.broadcasts[i])
    }

    /// JSON dump with 1-based indices and hex payloads.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Slot<'a> {
            slot: u32,
            payload: String,
            contributors: &'a [Contributor],
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            packets_sent: usize,
            broadcasts: Vec<Slot<'a>>,
        }
        let shifted: Vec<Vec<Contributor>> = self
            .broadcasts
            .iter()
            .map(|b| {
                b.contributors
                    .iter()
                    .map(|c| Contributor { user: c.user + 1, file: c.file + 1, packet: c.packet + 1 })
                    .collect()
            })
            .collect();
        let dump = Dump {
            packets_sent: self.packets_sent(),
            broadcasts: self
                .broadcasts
                .iter()
                .zip(&shifted)
                .map(|(b, c)| Slot { slot: b.slot, payload: hex::encode(&b.payload), contributors: c })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("transcript serializes")
    }
}

fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

/// For every integer `s` in ascending order, broadcasts the XOR of
/// `W[d_k][j]` over all cells `p[j][k] = s`.
pub fn deliver(grid: &Grid, lib: &FileLibrary, d: &DemandVector) -> Result<Transcript, SimError> {
    check_dims(grid, lib)?;
    if d.len() != grid.cols() {
        return Err(SimError::DimensionError(format!(
            "{} demands for K={} users",
            d.len(),
            grid.cols()
        )));
    }
    let mut slots: BTreeMap<u32, Vec<Contributor>> = BTreeMap::new();
    for j in 0..grid.rows() {
        for user in 0..grid.cols() {
            if let Entry::Color(s) = grid.get(j, user) {
                slots.entry(s).or_default().push(Contributor { user, file: d.0[user], packet: j });
            }
        }
    }
    let broadcasts = slots
        .into_iter()
        .map(|(slot, contributors)| {
            let mut payload = vec![0u8; lib.packet_len()];
            for c in &contributors {
                xor_into(&mut payload, lib.packet(c.file, c.packet));
            }
            Broadcast { slot, payload, contributors }
        })
        .collect();
    Ok(Transcript { broadcasts })
}

/// Recovers the file requested by `user`: cached packets come straight from
/// the cache, every other packet from its slot's broadcast after XOR-ing out
/// the cached terms of the other contributors.
pub fn decode(
    user: usize,
    cache: &Cache,
    transcript: &Transcript,
    d: &DemandVector,
    grid: &Grid,
) -> Result<Vec<u8>, SimError> {
    let want = d.0[user];
    let mut file = Vec::new();
    for j in 0..grid.rows() {
        let fail = |reason: String| SimError::DecodeError { user, packet: j, reason };
        match grid.get(j, user) {
            Entry::Star => {
                let packet = cache.get(want, j).ok_or_else(|| fail("packet missing from cache".into()))?;
                file.extend_from_slice(packet);
            }
            Entry::Color(s) => {
                let b = transcript.slot(s).ok_or_else(|| fail(format!("no broadcast for slot {s}")))?;
                let mut packet = b.payload.clone();
                let mut own = false;
                for c in &b.contributors {
                    if c.user == user && c.packet == j {
                        own = true;
                        continue;
                    }
                    let known = cache.get(c.file, c.packet).ok_or_else(|| {
                        fail(format!(
                            "slot {s} mixes in W[{}][{}] which is not cached",
                            c.file + 1,
                            c.packet + 1
                        ))
                    })?;
                    xor_into(&mut packet, known);
                }
                if !own {
                    return Err(fail(format!("slot {s} does not carry this packet")));
                }
                file.extend_from_slice(&packet);
            }
        }
    }
    Ok(file)
}

/// Outcome for one user in one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserOutcome {
    pub user: usize,
    pub demand: usize,
    pub result: Result<(), SimError>,
}

impl UserOutcome {
    pub fn decoded_ok(&self) -> bool {
        self.result.is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub transcript: Transcript,
    pub users: Vec<UserOutcome>,
}

impl RoundOutcome {
    pub fn all_decoded(&self) -> bool {
        self.users.iter().all(UserOutcome::decoded_ok)
    }
}

/// Place, deliver and decode for every user; a decoded file that differs
/// from the original counts as a failure.
pub fn run_round(grid: &Grid, lib: &FileLibrary, d: &DemandVector) -> Result<RoundOutcome, SimError> {
    let caches = place(grid, lib)?;
    let transcript = deliver(grid, lib, d)?;
    let users = caches
        .iter()
        .map(|cache| {
            let user = cache.user;
            let result = decode(user, cache, &transcript, d, grid).and_then(|file| {
                if file == lib.file(d.0[user]) {
                    Ok(())
                } else {
                    Err(SimError::DecodeError { user, packet: 0, reason: "decoded bytes differ".into() })
                }
            });
            UserOutcome { user, demand: d.0[user], result }
        })
        .collect();
    Ok(RoundOutcome { transcript, users })
}

/// One line of the demand trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub trial: usize,
    pub user: usize,
    pub demand: usize,
    pub decoded_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Measurement {
    /// S/F
    pub delivery_rate: Ratio<u64>,
    /// K(1 - Z/F), the load without coding
    pub uncoded_rate: Ratio<u64>,
    pub all_decoded: bool,
    /// Largest number of packets sent in any trial.
    pub max_packets_sent: usize,
    pub trace: Vec<TraceRow>,
}

/// Runs `trials` rounds with uniform random demands over `n_files` files.
pub fn measure(p: &Pda, n_files: usize, trials: usize, seed: u64) -> Result<Measurement, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lib = FileLibrary::random(n_files, p.f(), DEFAULT_PACKET_LEN, rng.next_u64());
    let demands: Vec<DemandVector> = (0..trials).map(|_| DemandVector::random(p.k(), n_files, &mut rng)).collect();
    measure_demands(p, &lib, &demands)
}

/// Runs one round per listed demand vector.
pub fn measure_demands(p: &Pda, lib: &FileLibrary, demands: &[DemandVector]) -> Result<Measurement, SimError> {
    let rounds = demands
        .par_iter()
        .map(|d| run_round(p.grid(), lib, d))
        .collect::<Result<Vec<_>, _>>()?;
    let f = p.f() as u64;
    let mut trace = Vec::new();
    for (trial, round) in rounds.iter().enumerate() {
        trace.extend(round.users.iter().map(|u| TraceRow {
            trial,
            user: u.user,
            demand: u.demand,
            decoded_ok: u.decoded_ok(),
        }));
    }
    Ok(Measurement {
        delivery_rate: Ratio::new(p.s() as u64, f),
        uncoded_rate: Ratio::new(p.k() as u64 * (f - p.z() as u64), f),
        all_decoded: rounds.iter().all(RoundOutcome::all_decoded),
        max_packets_sent: rounds.iter().map(|r| r.transcript.packets_sent()).max().unwrap_or(0),
        trace,
    })
}

/// Writes `trial,user,demand,decoded_ok` with 1-based indices.
pub fn write_trace_csv<W: Write>(mut out: W, comment: Option<&str>, rows: &[TraceRow]) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "trial,user,demand,decoded_ok")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.trial + 1, r.user + 1, r.demand + 1, r.decoded_ok)?;
    }
    Ok(())
}

/// Demand vector from 1-based file indices, as typed on a command line.
pub fn parse_demands(text: &str, n_files: usize) -> Result<DemandVector, SimError> {
    let parsed = text
        .split(',')
        .map(|t| t.trim().parse::<usize>().ok().filter(|&d| d >= 1))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| SimError::DimensionError(format!("bad demand list `{text}`")))?;
    DemandVector::new(parsed.into_iter().map(|d| d - 1).collect(), n_files)
}
