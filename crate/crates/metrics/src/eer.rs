use crate::error::{MetricsError, Result};
use crate::record::{Label, ScoreRecord};

/// Error rates when accepting every score at or above `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Fraction of spoof accepted.
    pub far: f64,
    /// Fraction of bona-fide rejected.
    pub frr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

/// Operating points at every distinct score in ascending order, plus one
/// point above the highest score where everything is rejected. FAR never
/// increases and FRR never decreases along the list.
pub fn det_points(records: &[ScoreRecord]) -> Result<Vec<OperatingPoint>> {
    let (mut bona, mut spoof) = (Vec::new(), Vec::new());
    for (index, r) in records.iter().enumerate() {
        match r.label {
            Some(Label::Bonafide) => bona.push(r.score as f64),
            Some(Label::Spoof) => spoof.push(r.score as f64),
            None => return Err(MetricsError::Unlabeled { index }),
        }
    }
    if bona.is_empty() || spoof.is_empty() {
        return Err(MetricsError::SingleClass {
            bonafide: bona.len(),
            spoof: spoof.len(),
        });
    }
    bona.sort_by(f64::total_cmp);
    spoof.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = bona.iter().chain(&spoof).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let top = *thresholds.last().expect("non-empty");
    thresholds.push(top + top.abs().max(1.0));

    let (nb, ns) = (bona.len() as f64, spoof.len() as f64);
    let (mut ib, mut is) = (0, 0);
    Ok(thresholds
        .into_iter()
        .map(|t| {
            while ib < bona.len() && bona[ib] < t {
                ib += 1;
            }
            while is < spoof.len() && spoof[is] < t {
                is += 1;
            }
            OperatingPoint {
                far: (spoof.len() - is) as f64 / ns,
                frr: ib as f64 / nb,
                threshold: t,
            }
        })
        .collect())
}

/// Equal error rate. Takes the lowest threshold where FRR reaches FAR; when
/// the rates cross strictly between two operating points, both the rate and
/// the threshold are interpolated linearly.
pub fn eer(records: &[ScoreRecord]) -> Result<Eer> {
    let pts = det_points(records)?;
    let i = pts
        .iter()
        .position(|p| p.frr >= p.far)
        .expect("the last point rejects everything");
    let p = pts[i];
    if p.frr == p.far || i == 0 {
        return Ok(Eer {
            eer: p.far.max(p.frr),
            threshold: p.threshold,
        });
    }
    let q = pts[i - 1];
    let (dq, dp) = (q.frr - q.far, p.frr - p.far);
    let t = -dq / (dp - dq);
    Ok(Eer {
        eer: q.far + t * (p.far - q.far),
        threshold: q.threshold + t * (p.threshold - q.threshold),
    })
}
