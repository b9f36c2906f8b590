//! Effective ranks of the tail of a spectrum.

use serde::Serialize;

use super::profile::SpectralProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankReport {
    pub k: usize,
    /// `tr(Sigma_{>k}) / ‖Sigma_{>k}‖`
    pub r_k: f64,
    /// `tr(Sigma_{>k})^2 / tr(Sigma_{>k}^2)`
    pub big_r_k: f64,
    /// `r_k(Sigma^2) = tr(Sigma_{>k}^2) / ‖Sigma_{>k}‖^2`
    pub r_k_sq: f64,
    pub tail_trace: f64,
    pub tail_trace_sq: f64,
    pub tail_norm: f64,
}

pub fn effective_ranks(profile: &SpectralProfile, k: usize) -> Result<RankReport> {
    let tail_norm = profile.tail_norm(k);
    if !(tail_norm > 0.0) {
        return Err(Error::EmptyTail { index: k + 1 });
    }
    let tail_trace = profile.tail_trace(k);
    let tail_trace_sq = profile.tail_trace_sq(k);
    Ok(RankReport {
        k,
        r_k: tail_trace / tail_norm,
        big_r_k: tail_trace * tail_trace / tail_trace_sq,
        r_k_sq: tail_trace_sq / (tail_norm * tail_norm),
        tail_trace,
        tail_trace_sq,
        tail_norm,
    })
}
