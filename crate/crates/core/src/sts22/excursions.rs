//! Random excursions and random excursions variant tests.

use super::Outcome;
use crate::special::{erfc, igamc};

pub(super) const RE_STATES: [i64; 8] = [-4, -3, -2, -1, 1, 2, 3, 4];
pub(super) const REV_STATES: [i64; 18] = [-9, -8, -7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7, 8, 9];

struct Walk {
    cycles: usize,
    /// `nu[s][k]`: cycles in which state `RE_STATES[s]` was visited exactly
    /// `k` times (`k = 5` collects five or more).
    nu: [[usize; 6]; 8],
    /// Total visits to each of `REV_STATES`.
    visits: [usize; 18],
}

fn walk(eps: &[u8]) -> Walk {
    let mut w = Walk { cycles: 0, nu: [[0; 6]; 8], visits: [0; 18] };
    let mut in_cycle = [0usize; 8];
    let close = |in_cycle: &mut [usize; 8], w: &mut Walk| {
        w.cycles += 1;
        for (s, c) in in_cycle.iter_mut().enumerate() {
            w.nu[s][(*c).min(5)] += 1;
            *c = 0;
        }
    };
    let mut s = 0i64;
    for &b in eps {
        s += if b == 1 { 1 } else { -1 };
        if s == 0 {
            close(&mut in_cycle, &mut w);
            continue;
        }
        if (1..=4).contains(&s.abs()) {
            in_cycle[if s < 0 { (s + 4) as usize } else { (s + 3) as usize }] += 1;
        }
        if (1..=9).contains(&s.abs()) {
            w.visits[if s < 0 { (s + 9) as usize } else { (s + 8) as usize }] += 1;
        }
    }
    if s != 0 {
        close(&mut in_cycle, &mut w);
    }
    w
}

fn enough_cycles(n: usize, cycles: usize) -> bool {
    cycles as f64 >= (0.005 * (n as f64).sqrt()).max(500.0)
}

fn visit_probability(x: i64, k: usize) -> f64 {
    let a = 1.0 / (2.0 * x.abs() as f64);
    match k {
        0 => 1.0 - a,
        1..=4 => a * a * (1.0 - a).powi(k as i32 - 1),
        _ => a * (1.0 - a).powi(4),
    }
}

pub(super) fn random_excursions(eps: &[u8]) -> Vec<Outcome> {
    let w = walk(eps);
    if !enough_cycles(eps.len(), w.cycles) {
        return vec![Outcome::na(); RE_STATES.len()];
    }
    excursions_from(&w)
}

fn excursions_from(w: &Walk) -> Vec<Outcome> {
    let j = w.cycles as f64;
    RE_STATES
        .iter()
        .zip(&w.nu)
        .map(|(&x, nu)| {
            let chi2: f64 = (0..6)
                .map(|k| {
                    let e = j * visit_probability(x, k);
                    (nu[k] as f64 - e).powi(2) / e
                })
                .sum();
            Outcome::new(igamc(2.5, chi2 / 2.0), chi2)
        })
        .collect()
}

pub(super) fn random_excursions_variant(eps: &[u8]) -> Vec<Outcome> {
    let w = walk(eps);
    if !enough_cycles(eps.len(), w.cycles) {
        return vec![Outcome::na(); REV_STATES.len()];
    }
    variant_from(&w)
}

fn variant_from(w: &Walk) -> Vec<Outcome> {
    let j = w.cycles as f64;
    REV_STATES
        .iter()
        .zip(&w.visits)
        .map(|(&x, &xi)| {
            let den = (2.0 * j * (4.0 * x.abs() as f64 - 2.0)).sqrt();
            Outcome::new(erfc((xi as f64 - j).abs() / den), xi as f64)
        })
        .collect()
}
