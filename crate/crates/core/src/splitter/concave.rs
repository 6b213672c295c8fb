//! Concave boundary points by multi-scale curvature voting.

use serde::{Deserialize, Serialize};

use crate::raster::Contour;

use super::curvature::{curvature_profile, CurvatureProfile};
use super::SplitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcaveConfig {
    /// Smoothing scales, in contour vertices.
    pub scales: Vec<f64>,
    /// A point survives if it is found at this many scales.
    pub min_votes: usize,
    /// Detection threshold on `-κ`, in 1/px.
    pub kappa_min: f64,
    /// Width of the non-minimum suppression window, in vertices.
    pub nms_window: usize,
    /// Detections at different scales within this many vertices are the same point.
    pub vote_radius: usize,
}

impl Default for ConcaveConfig {
    fn default() -> Self {
        Self { scales: vec![2.0, 3.0, 5.0], min_votes: 2, kappa_min: 0.08, nms_window: 5, vote_radius: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavePoint {
    /// Vertex index on the contour.
    pub index: usize,
    /// Vertex position (pixel corner).
    pub position: (f64, f64),
    /// Signed curvature at the detecting scale; always below `-kappa_min`.
    pub curvature: f64,
    /// Scale that located the point.
    pub sigma: f64,
    /// Unit vector pointing into the region.
    pub inward_normal: (f64, f64),
}

/// Indices of local curvature minima below `-kappa_min`, suppressing
/// non-minima within `window` vertices.
pub fn local_concave_minima(prof: &CurvatureProfile, kappa_min: f64, window: usize) -> Vec<usize> {
    let n = prof.len();
    let half = (window / 2).max(1) as isize;
    (0..n)
        .filter(|&i| {
            let k = prof.kappa[i];
            if k >= -kappa_min {
                return false;
            }
            (1..=half).all(|d| {
                let before = prof.kappa[(i as isize - d).rem_euclid(n as isize) as usize];
                let after = prof.kappa[(i as isize + d).rem_euclid(n as isize) as usize];
                // plateaus resolve to their first vertex
                k < before && k <= after
            })
        })
        .collect()
}

fn circular_gap(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Concave points of a contour. Candidates are found independently at each
/// configured scale and kept where at least `min_votes` scales agree.
/// The `reference` profile supplies normals and is the preferred locator.
pub fn detect_concave_points(
    c: &Contour,
    reference: &CurvatureProfile,
    cfg: &ConcaveConfig,
) -> Result<Vec<ConcavePoint>, SplitError> {
    if reference.len() != c.len() {
        return Err(SplitError::InvalidParameter("profile does not match contour"));
    }
    let n = c.len();
    let profiles: Vec<CurvatureProfile> = cfg
        .scales
        .iter()
        .map(|&s| {
            if s == reference.sigma {
                Ok(reference.clone())
            } else {
                curvature_profile(c, s)
            }
        })
        .collect::<Result<_, _>>()?;

    // (vertex, scale index)
    let mut hits: Vec<(usize, usize)> = profiles
        .iter()
        .enumerate()
        .flat_map(|(si, p)| {
            local_concave_minima(p, cfg.kappa_min, cfg.nms_window).into_iter().map(move |i| (i, si))
        })
        .collect();
    if hits.is_empty() {
        return Ok(Vec::new());
    }
    hits.sort_unstable();

    // single-linkage clusters along the closed contour
    let mut groups: Vec<Vec<(usize, usize)>> = vec![vec![hits[0]]];
    for w in hits.windows(2) {
        if w[1].0 - w[0].0 <= cfg.vote_radius {
            groups.last_mut().expect("non-empty").push(w[1]);
        } else {
            groups.push(vec![w[1]]);
        }
    }
    if groups.len() > 1 {
        let first = groups[0][0].0;
        let last = groups[groups.len() - 1].last().expect("non-empty").0;
        if circular_gap(first, last, n) <= cfg.vote_radius {
            let tail = groups.pop().expect("non-empty");
            groups[0].extend(tail);
        }
    }

    let ref_scale = cfg.scales.iter().position(|&s| s == reference.sigma);
    let mut points = Vec::new();
    for g in groups {
        let mut scales: Vec<usize> = g.iter().map(|h| h.1).collect();
        scales.sort_unstable();
        scales.dedup();
        if scales.len() < cfg.min_votes {
            continue;
        }
        // locate with the reference scale when it voted, otherwise the finest voting scale
        let locator = match ref_scale {
            Some(r) if scales.contains(&r) => r,
            _ => *scales
                .iter()
                .min_by(|&&a, &&b| cfg.scales[a].total_cmp(&cfg.scales[b]))
                .expect("at least one vote"),
        };
        let (index, _) = g
            .iter()
            .filter(|h| h.1 == locator)
            .map(|h| (h.0, profiles[locator].kappa[h.0]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("locator voted");
        let (vx, vy) = c.points()[index];
        points.push(ConcavePoint {
            index,
            position: (vx as f64, vy as f64),
            curvature: profiles[locator].kappa[index],
            sigma: cfg.scales[locator],
            inward_normal: reference.inward_normal(index),
        });
    }
    points.sort_by_key(|p| p.index);
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_respect_threshold_and_window() {
        let kappa = vec![0.1, -0.05, -0.2, -0.1, 0.0, -0.3, -0.3, 0.1, 0.2, 0.1];
        let prof = CurvatureProfile { sigma: 1.0, kappa, smoothed: vec![(0.0, 0.0); 10] };
        // -0.2 at 2 is within 3 of -0.3 at 5? window 5 => +-2, so 2 survives
        assert_eq!(local_concave_minima(&prof, 0.08, 5), vec![2, 5]);
        assert_eq!(local_concave_minima(&prof, 0.25, 5), vec![5]);
        // wider window suppresses the weaker minimum
        assert_eq!(local_concave_minima(&prof, 0.08, 7), vec![5]);
    }
}
