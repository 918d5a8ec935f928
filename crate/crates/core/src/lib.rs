//! Placement delivery arrays (PDAs) for coded caching.
//!
//! * [`pda`]: the array type, the C1/C2 verifier and the MN construction.
//! * [`graph`]: the colored bipartite graph dual, strong edge coloring and
//!   edge subsampling.
//! * [`seqcodec`]: adjacency matrices, edge/color sequences and training pairs.
//! * [`neural`]: the bidirectional-GRU pointer-attention colorer and its
//!   supervised + REINFORCE training.
//! * [`cachesim`]: placement, XOR delivery and decoding driven by a PDA.
//! * [`bench`]: timing harness comparing greedy and neural coloring.

pub mod bench;
pub mod cachesim;
pub mod graph;
pub mod neural;
pub mod pda;
pub mod seqcodec;

pub use pda::{construct_mn_pda, verify, verify_with, Entry, Grid, Pda, PdaError, VerifyReport};
