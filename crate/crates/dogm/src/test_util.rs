//! Shared helpers for unit tests, including the independent brute-force
//! Dempster oracle used to pin expected values.

use rand::Rng;

use crate::grid::EvidenceMass;

/// Independent oracle: Dempster's rule by brute force over all subset
/// pairs of the power set of the three-element frame, subsets encoded as
/// bitmasks (F = 0b001, S = 0b010, D = 0b100). `None` on total conflict.
pub fn brute_force_combine(a: &EvidenceMass, b: &EvidenceMass) -> Option<EvidenceMass> {
    let to_map = |m: &EvidenceMass| {
        let mut v = [0.0f64; 8];
        v[0b001] = m.m_f;
        v[0b010] = m.m_s;
        v[0b100] = m.m_d;
        v[0b110] = m.m_sd;
        v[0b111] = m.m_omega;
        v
    };
    let (ma, mb) = (to_map(a), to_map(b));
    let mut acc = [0.0f64; 8];
    let mut conflict = 0.0;
    for (sa, &pa) in ma.iter().enumerate() {
        for (sb, &pb) in mb.iter().enumerate() {
            let p = pa * pb;
            if p == 0.0 {
                continue;
            }
            let inter = sa & sb;
            if inter == 0 {
                conflict += p;
            } else {
                acc[inter] += p;
            }
        }
    }
    if conflict >= 1.0 - 1e-12 {
        return None;
    }
    let n = 1.0 - conflict;
    Some(EvidenceMass {
        m_f: acc[0b001] / n,
        m_s: acc[0b010] / n,
        m_d: acc[0b100] / n,
        m_sd: acc[0b110] / n,
        m_omega: acc[0b111] / n,
    })
}

/// Random mass function over the five tracked hypotheses (flat Dirichlet).
pub fn random_mass(rng: &mut impl Rng) -> EvidenceMass {
    let raw: [f64; 5] = std::array::from_fn(|_| -rng.gen::<f64>().max(1e-12).ln());
    let sum: f64 = raw.iter().sum();
    EvidenceMass {
        m_f: raw[0] / sum,
        m_s: raw[1] / sum,
        m_d: raw[2] / sum,
        m_sd: raw[3] / sum,
        m_omega: raw[4] / sum,
    }
}
