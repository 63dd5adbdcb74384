//! Fixed partitions of the integration domain for one sample. The same pieces
//! feed either a precomputed node rule or the adaptive integrator.

use crate::error::Result;
use crate::kde::{Kde, KernelKind};
use crate::models::{ModelSpec, Sample};
use crate::numerics::{Domain, Interval, NodeRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub domain: Domain,
    pub panels: usize,
    pub order: usize,
}

impl Piece {
    fn new(domain: Domain, panels: usize, order: usize) -> Self {
        Self { domain, panels, order }
    }
}

fn median_abs(sample: &Sample) -> f64 {
    let mut v: Vec<f64> = sample.observations.iter().map(|y| y.abs()).collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn median(sample: &Sample) -> f64 {
    let mut v = sample.observations.clone();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Pieces for integrands built from model densities only.
pub(crate) fn model_pieces(model: &ModelSpec, sample: &Sample) -> Vec<Piece> {
    match model {
        ModelSpec::GaussMix2 { .. } => {
            let lo = sample.min() - 6.0;
            let hi = sample.max() + 6.0;
            let core = ((hi - lo).ceil() as usize).max(4);
            vec![
                Piece::new(Domain::new(Interval::new(f64::NEG_INFINITY, lo)).with_hint(lo, 2.0), 6, 12),
                Piece::new(Domain::new(Interval::new(lo, hi)), core, 12),
                Piece::new(Domain::new(Interval::new(hi, f64::INFINITY)).with_hint(hi, 2.0), 6, 12),
            ]
        }
        ModelSpec::WeibullMix2 { .. } => {
            let m = median(sample).max(1e-3);
            vec![Piece::new(
                Domain::log_positive(Interval::positive_half_line()).with_hint(m.ln(), 2.5),
                24,
                16,
            )]
        }
        ModelSpec::CauchyScale { .. } => {
            let s = median_abs(sample).max(1e-3);
            vec![Piece::new(Domain::new(Interval::real_line()).with_hint(0.0, s), 24, 16)]
        }
    }
}

/// Pieces covering the kernel estimate's support intersected with the model support.
/// Kinks of compact kernels sit on piece edges, and Weibull integrands get a log
/// substitution next to the origin.
pub(crate) fn kernel_pieces(model: &ModelSpec, kde: &Kde, sample: &Sample) -> Vec<Piece> {
    let support = kde.support(model.support());
    let w = kde.bandwidth;
    let positive = support.lo == 0.0;
    let mut pieces = Vec::new();
    match kde.kind {
        KernelKind::Epanechnikov => {
            let mut knots: Vec<f64> = sample
                .observations
                .iter()
                .flat_map(|&y| [y - w, y + w])
                .map(|k| k.clamp(support.lo, support.hi))
                .collect();
            knots.push(support.lo);
            knots.push(support.hi);
            knots.sort_by(f64::total_cmp);
            knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
            for pair in knots.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if positive && a == 0.0 {
                    pieces.push(Piece::new(
                        Domain::log_positive(Interval::new(0.0, b)).with_hint(0.0, 4.0),
                        16,
                        12,
                    ));
                } else if positive && a < w {
                    // power-law behaviour of the model density near the origin
                    pieces.push(Piece::new(Domain::log_positive(Interval::new(a, b)), 4, 12));
                } else {
                    pieces.push(Piece::new(Domain::new(Interval::new(a, b)), 1, 8));
                }
            }
        }
        KernelKind::Gaussian | KernelKind::Cauchy => {
            let reach = if kde.kind == KernelKind::Gaussian { 6.0 } else { 10.0 };
            let mut lo = sample.min() - reach * w;
            let hi = sample.max() + reach * w;
            let tail_scale = (0.5 * (hi - lo)).max(1.0);
            if positive {
                // keep the model's behaviour at the origin inside the log piece
                lo = lo.max(w);
                pieces.push(Piece::new(
                    Domain::log_positive(Interval::new(0.0, lo)).with_hint(0.0, 4.0),
                    16,
                    12,
                ));
            } else {
                pieces.push(Piece::new(
                    Domain::new(Interval::new(f64::NEG_INFINITY, lo)).with_hint(lo, tail_scale),
                    8,
                    12,
                ));
            }
            let core = (((hi - lo) / w).ceil() as usize).max(4);
            pieces.push(Piece::new(Domain::new(Interval::new(lo, hi)), core, 8));
            pieces.push(Piece::new(
                Domain::new(Interval::new(hi, f64::INFINITY)).with_hint(hi, tail_scale),
                8,
                12,
            ));
        }
    }
    pieces
}

pub(crate) fn build_rule(pieces: &[Piece]) -> Result<NodeRule> {
    let mut rule = NodeRule {
        nodes: Vec::new(),
        weights: Vec::new(),
    };
    for p in pieces {
        rule.append(NodeRule::composite(&p.domain, p.panels, p.order)?);
    }
    Ok(rule)
}
