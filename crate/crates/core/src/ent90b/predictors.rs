//! Prediction estimators: MultiMCW, lag, MultiMMC and LZ78Y.
//!
//! Ties inside a model (two symbols with equal counts) resolve to the symbol
//! observed most recently in that model; ties on the scoreboard resolve to
//! the later subpredictor. Both rules are unchanged by relabeling 0 <-> 1.

use super::{prediction_entropy, Entropy};

/// Tracks correct predictions and the longest run of them.
#[derive(Default)]
struct Record {
    correct: usize,
    run: usize,
    longest: usize,
    total: usize,
}

impl Record {
    fn push(&mut self, hit: bool) {
        self.total += 1;
        if hit {
            self.correct += 1;
            self.run += 1;
            self.longest = self.longest.max(self.run);
        } else {
            self.run = 0;
        }
    }

    fn entropy(&self) -> Entropy {
        prediction_entropy(self.correct, self.total, self.longest)
    }
}

/// Winner selection shared by the ensemble predictors.
struct Scoreboard {
    scores: Vec<usize>,
    winner: usize,
}

impl Scoreboard {
    fn new(n: usize) -> Self {
        Scoreboard { scores: vec![0; n], winner: 0 }
    }

    fn update(&mut self, predictions: &[Option<u8>], actual: u8) {
        for (j, p) in predictions.iter().enumerate() {
            if *p == Some(actual) {
                self.scores[j] += 1;
                if self.scores[j] >= self.scores[self.winner] {
                    self.winner = j;
                }
            }
        }
    }
}

const MCW_WINDOWS: [usize; 4] = [63, 255, 1023, 4095];

pub(super) fn multi_mcw(s: &[u8]) -> Entropy {
    let w1 = MCW_WINDOWS[0];
    if s.len() <= w1 + 1 {
        return Entropy::NotApplicable;
    }
    let mut ones = [0usize; 4];
    let mut board = Scoreboard::new(4);
    let mut rec = Record::default();
    let mut preds = [None; 4];
    for i in 0..s.len() {
        // Slide each window so it covers s[i - w .. i].
        if i > 0 {
            for (j, &w) in MCW_WINDOWS.iter().enumerate() {
                ones[j] += s[i - 1] as usize;
                if i > w {
                    ones[j] -= s[i - 1 - w] as usize;
                }
            }
        }
        if i < w1 {
            continue;
        }
        for (j, &w) in MCW_WINDOWS.iter().enumerate() {
            // Windows have odd length, so there is never a tie.
            preds[j] = (i >= w).then(|| (2 * ones[j] > w) as u8);
        }
        rec.push(preds[board.winner] == Some(s[i]));
        board.update(&preds, s[i]);
    }
    rec.entropy()
}

const LAGS: usize = 128;

pub(super) fn lag(s: &[u8]) -> Entropy {
    if s.len() < 3 {
        return Entropy::NotApplicable;
    }
    let mut board = Scoreboard::new(LAGS);
    let mut rec = Record::default();
    let mut preds = [None; LAGS];
    for i in 1..s.len() {
        for (d, p) in preds.iter_mut().enumerate() {
            *p = (d < i).then(|| s[i - d - 1]);
        }
        rec.push(preds[board.winner] == Some(s[i]));
        board.update(&preds, s[i]);
    }
    rec.entropy()
}

const MMC_DEPTH: usize = 16;
const MMC_MAX_ENTRIES: usize = 100_000;

/// Follower statistics for one context.
#[derive(Clone, Copy, Default)]
struct Followers {
    count: [u32; 2],
    last: u8,
}

impl Followers {
    fn predict(&self) -> Option<u8> {
        match self.count {
            [0, 0] => None,
            [a, b] if a == b => Some(self.last),
            [a, b] => Some((b > a) as u8),
        }
    }

    fn record(&mut self, y: u8) {
        self.count[y as usize] += 1;
        self.last = y;
    }
}

pub(super) fn multi_mmc(s: &[u8]) -> Entropy {
    if s.len() < 4 {
        return Entropy::NotApplicable;
    }
    // Model d (order d + 1) maps a (d + 1)-bit context to its followers.
    let mut models: Vec<Vec<Followers>> = (0..MMC_DEPTH).map(|d| vec![Followers::default(); 1 << (d + 1)]).collect();
    let mut entries = [0usize; MMC_DEPTH];
    let mut board = Scoreboard::new(MMC_DEPTH);
    let mut rec = Record::default();
    let mut preds = [None; MMC_DEPTH];
    // Rolling history: bit k holds s[i - 1 - k].
    let mut hist = 0u32;
    for i in 0..s.len() {
        if i >= 1 {
            let y = s[i - 1];
            // Context ending at s[i - 2] is `hist` before shifting in y.
            for (d, model) in models.iter_mut().enumerate() {
                let order = d + 1;
                if i < order + 1 {
                    break;
                }
                let ctx = (hist & ((1u32 << order) - 1)) as usize;
                let f = &mut model[ctx];
                if f.count[y as usize] == 0 {
                    if entries[d] >= MMC_MAX_ENTRIES {
                        continue;
                    }
                    entries[d] += 1;
                }
                f.record(y);
            }
            hist = (hist << 1) | y as u32;
        }
        if i < 2 {
            continue;
        }
        for (d, model) in models.iter().enumerate() {
            let order = d + 1;
            preds[d] = if i >= order { model[(hist & ((1u32 << order) - 1)) as usize].predict() } else { None };
        }
        rec.push(preds[board.winner] == Some(s[i]));
        board.update(&preds, s[i]);
    }
    rec.entropy()
}

const LZ_B: usize = 16;
const LZ_MAX_DICT: usize = 65_536;

pub(super) fn lz78y(s: &[u8]) -> Entropy {
    if s.len() < LZ_B + 3 {
        return Entropy::NotApplicable;
    }
    // Context of length j with value v lives at index (1 << j) | v.
    let mut dict = vec![Followers::default(); 1 << (LZ_B + 1)];
    let mut present = vec![false; 1 << (LZ_B + 1)];
    let mut size = 0usize;
    let mut rec = Record::default();
    let key = |j: usize, end: usize| -> usize {
        // Context s[end - j .. end], first bit most significant.
        let v = s[end - j..end].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
        (1 << j) | v
    };
    for i in LZ_B + 1..s.len() {
        let y = s[i - 1];
        for j in (1..=LZ_B).rev() {
            let k = key(j, i - 1);
            if !present[k] && size < LZ_MAX_DICT {
                present[k] = true;
                size += 1;
            }
            if present[k] {
                dict[k].record(y);
            }
        }
        let mut prediction = None;
        let mut max_count = 0;
        for j in (1..=LZ_B).rev() {
            let k = key(j, i);
            if !present[k] {
                continue;
            }
            let f = &dict[k];
            if let Some(p) = f.predict() {
                if f.count[p as usize] > max_count {
                    max_count = f.count[p as usize];
                    prediction = Some(p);
                }
            }
        }
        rec.push(prediction == Some(s[i]));
    }
    rec.entropy()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(e: Entropy) -> f64 {
        e.value().unwrap()
    }

    #[test]
    fn periodic_streams_are_predictable() {
        let alt: Vec<u8> = (0..20_000).map(|i| (i % 2) as u8).collect();
        assert!(h(lag(&alt)) < 0.01);
        assert!(h(multi_mmc(&alt)) < 0.01);
        assert!(h(lz78y(&alt)) < 0.01);
        let p3: Vec<u8> = (0..20_000).map(|i| (i % 3 == 0) as u8).collect();
        assert!(h(lag(&p3)) < 0.01);
        assert!(h(multi_mmc(&p3)) < 0.01);
    }

    #[test]
    fn constant_stream_is_zero() {
        let s = vec![0u8; 10_000];
        for f in [multi_mcw, lag, multi_mmc, lz78y] {
            assert_eq!(h(f(&s)), 0.0);
        }
    }

    #[test]
    fn scoreboard_prefers_later_on_ties() {
        let mut b = Scoreboard::new(3);
        b.update(&[Some(1), Some(1), Some(0)], 1);
        assert_eq!(b.winner, 1);
        b.update(&[Some(1), Some(0), Some(0)], 1);
        assert_eq!(b.winner, 0);
    }

    #[test]
    fn followers_tie_uses_last() {
        let mut f = Followers::default();
        assert_eq!(f.predict(), None);
        f.record(1);
        f.record(0);
        assert_eq!(f.predict(), Some(0));
        f.record(1);
        assert_eq!(f.predict(), Some(1));
    }
}
