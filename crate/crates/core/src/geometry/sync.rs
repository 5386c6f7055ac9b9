//! RGB/depth pairing on originating time.
//!
//! Each depth frame, in time order, takes the nearest not-yet-used RGB frame
//! within the tolerance (ties go to the earlier RGB frame). Unmatched frames
//! are dropped and counted.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct Paired<R, D> {
    pub rgb_time: u64,
    pub rgb: R,
    /// Originating time of the depth frame; the pair is stamped with it.
    pub pair_time: u64,
    pub depth: D,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairStats {
    pub paired: usize,
    pub dropped_rgb: usize,
    pub dropped_depth: usize,
}

/// Pairs two time-ordered sequences in one pass.
pub fn pair_rgb_depth<R, D>(
    rgb: Vec<(u64, R)>,
    depth: Vec<(u64, D)>,
    tolerance_ns: u64,
) -> (Vec<Paired<R, D>>, PairStats) {
    let mut rgb: Vec<(u64, Option<R>)> = rgb.into_iter().map(|(t, r)| (t, Some(r))).collect();
    let mut stats = PairStats::default();
    let mut pairs = Vec::new();
    let mut window_start = 0;
    for (dt, d) in depth {
        while window_start < rgb.len() && rgb[window_start].0 + tolerance_ns < dt {
            window_start += 1;
        }
        let mut best: Option<(u64, usize)> = None;
        for (i, (rt, r)) in rgb.iter().enumerate().skip(window_start) {
            if *rt > dt + tolerance_ns {
                break;
            }
            if r.is_none() {
                continue;
            }
            let gap = rt.abs_diff(dt);
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, i));
            }
        }
        match best {
            Some((_, i)) => {
                let rgb_time = rgb[i].0;
                pairs.push(Paired { rgb_time, rgb: rgb[i].1.take().unwrap(), pair_time: dt, depth: d });
                stats.paired += 1;
            }
            None => stats.dropped_depth += 1,
        }
    }
    stats.dropped_rgb = rgb.iter().filter(|(_, r)| r.is_some()).count();
    (pairs, stats)
}

/// Incremental form of [`pair_rgb_depth`] for a merged, time-ordered input.
///
/// A depth frame is resolved once the watermark (latest originating time seen
/// on any stream) passes `depth_time + tolerance`; by then every RGB frame that
/// could match it has arrived.
#[derive(Debug)]
pub struct RgbdSynchronizer<R, D> {
    tolerance_ns: u64,
    rgb: VecDeque<(u64, R)>,
    depth: VecDeque<(u64, D)>,
    last_depth_time: Option<u64>,
    stats: PairStats,
}

impl<R, D> RgbdSynchronizer<R, D> {
    pub fn new(tolerance_ns: u64) -> Self {
        Self {
            tolerance_ns,
            rgb: VecDeque::new(),
            depth: VecDeque::new(),
            last_depth_time: None,
            stats: PairStats::default(),
        }
    }

    pub fn stats(&self) -> PairStats {
        self.stats
    }

    pub fn push_rgb(&mut self, time: u64, frame: R) -> Vec<Paired<R, D>> {
        let out = self.advance(time);
        self.rgb.push_back((time, frame));
        out
    }

    pub fn push_depth(&mut self, time: u64, frame: D) -> Vec<Paired<R, D>> {
        let out = self.advance(time);
        self.depth.push_back((time, frame));
        self.last_depth_time = Some(time);
        out
    }

    /// Resolves every pending depth frame whose tolerance window closed before `watermark`.
    pub fn advance(&mut self, watermark: u64) -> Vec<Paired<R, D>> {
        let mut out = Vec::new();
        while let Some(&(dt, _)) = self.depth.front() {
            if dt + self.tolerance_ns >= watermark {
                break;
            }
            self.resolve_front(&mut out);
        }
        self.prune_rgb();
        out
    }

    /// Resolves everything left at end of input.
    pub fn finish(&mut self) -> Vec<Paired<R, D>> {
        let mut out = Vec::new();
        while !self.depth.is_empty() {
            self.resolve_front(&mut out);
        }
        self.stats.dropped_rgb += self.rgb.len();
        self.rgb.clear();
        out
    }

    fn resolve_front(&mut self, out: &mut Vec<Paired<R, D>>) {
        let (dt, d) = self.depth.pop_front().expect("caller checked");
        let mut best: Option<(u64, usize)> = None;
        for (i, (rt, _)) in self.rgb.iter().enumerate() {
            if *rt > dt + self.tolerance_ns {
                break;
            }
            if rt + self.tolerance_ns < dt {
                continue;
            }
            let gap = rt.abs_diff(dt);
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, i));
            }
        }
        match best {
            Some((_, i)) => {
                let (rgb_time, rgb) = self.rgb.remove(i).expect("index from enumerate");
                self.stats.paired += 1;
                out.push(Paired { rgb_time, rgb, pair_time: dt, depth: d });
            }
            None => self.stats.dropped_depth += 1,
        }
    }

    /// Drops RGB frames too old for any pending or future depth frame.
    fn prune_rgb(&mut self) {
        let horizon = match (self.depth.front(), self.last_depth_time) {
            (Some(&(t, _)), _) => t,
            (None, Some(t)) => t + 1,
            (None, None) => return,
        };
        while let Some(&(rt, _)) = self.rgb.front() {
            if rt + self.tolerance_ns >= horizon {
                break;
            }
            self.rgb.pop_front();
            self.stats.dropped_rgb += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const MS: u64 = 1_000_000;

    /// Exhaustive reference: for each depth frame scan every RGB frame.
    fn brute_force(rgb: &[u64], depth: &[u64], tol: u64) -> Vec<(usize, usize)> {
        let mut used = BTreeSet::new();
        let mut out = Vec::new();
        for (di, &dt) in depth.iter().enumerate() {
            let mut best: Option<(u64, usize)> = None;
            for (ri, &rt) in rgb.iter().enumerate() {
                let gap = rt.abs_diff(dt);
                if gap > tol || used.contains(&ri) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((g, bi)) => gap < g || (gap == g && ri < bi),
                };
                if better {
                    best = Some((gap, ri));
                }
            }
            if let Some((_, ri)) = best {
                used.insert(ri);
                out.push((ri, di));
            }
        }
        out
    }

    fn streaming(rgb: &[u64], depth: &[u64], tol: u64) -> (Vec<(usize, usize)>, PairStats) {
        // merge by (time, stream) with depth on the lower id
        let mut events: Vec<(u64, u8, usize)> = depth.iter().enumerate().map(|(i, &t)| (t, 0, i)).collect();
        events.extend(rgb.iter().enumerate().map(|(i, &t)| (t, 1, i)));
        events.sort();
        let mut sync = RgbdSynchronizer::new(tol);
        let mut out = Vec::new();
        for (t, kind, i) in events {
            let pairs = if kind == 0 { sync.push_depth(t, i) } else { sync.push_rgb(t, i) };
            out.extend(pairs.into_iter().map(|p| (p.rgb, p.depth)));
        }
        out.extend(sync.finish().into_iter().map(|p| (p.rgb, p.depth)));
        (out, sync.stats())
    }

    fn jittered(seed_times: Vec<(u8, i64)>) -> Vec<u64> {
        let mut t: Vec<u64> = seed_times
            .into_iter()
            .enumerate()
            .map(|(k, (_, jitter))| (k as u64 * 200 * MS + 50 * MS).saturating_add_signed(jitter))
            .collect();
        t.sort();
        t.dedup();
        t
    }

    #[test]
    fn identical_clocks_pair_everything() {
        let times: Vec<u64> = (0..25).map(|k| k * 200 * MS).collect();
        let rgb: Vec<_> = times.iter().map(|&t| (t, t)).collect();
        let depth: Vec<_> = times.iter().map(|&t| (t, t)).collect();
        let (pairs, stats) = pair_rgb_depth(rgb, depth, 20 * MS);
        assert_eq!(stats, PairStats { paired: 25, dropped_rgb: 0, dropped_depth: 0 });
        assert!(pairs.iter().all(|p| p.rgb_time == p.pair_time));
    }

    #[test]
    fn one_nanosecond_past_tolerance_drops_both() {
        let (pairs, stats) = pair_rgb_depth(vec![(1000, ())], vec![(1000 + 20 * MS + 1, ())], 20 * MS);
        assert!(pairs.is_empty());
        assert_eq!(stats, PairStats { paired: 0, dropped_rgb: 1, dropped_depth: 1 });
        let (pairs, _) = pair_rgb_depth(vec![(1000, ())], vec![(1000 + 20 * MS, ())], 20 * MS);
        assert_eq!(pairs.len(), 1);
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_streaming(
            rgb in prop::collection::vec((any::<u8>(), -40i64 * MS as i64..40 * MS as i64), 0..40),
            depth in prop::collection::vec((any::<u8>(), -40i64 * MS as i64..40 * MS as i64), 0..40),
            tol_ms in 0u64..60,
        ) {
            let rgb = jittered(rgb);
            let depth = jittered(depth);
            let tol = tol_ms * MS;
            let expected = brute_force(&rgb, &depth, tol);
            let (batch, stats) = pair_rgb_depth(
                rgb.iter().enumerate().map(|(i, &t)| (t, i)).collect(),
                depth.iter().enumerate().map(|(i, &t)| (t, i)).collect(),
                tol,
            );
            let batch: Vec<_> = batch.into_iter().map(|p| (p.rgb, p.depth)).collect();
            prop_assert_eq!(&batch, &expected);
            prop_assert_eq!(stats.paired + stats.dropped_depth, depth.len());
            prop_assert_eq!(stats.paired + stats.dropped_rgb, rgb.len());
            let (stream, sstats) = streaming(&rgb, &depth, tol);
            prop_assert_eq!(&stream, &expected);
            prop_assert_eq!(sstats, stats);
            // injectivity
            let used: BTreeSet<_> = batch.iter().map(|(r, _)| *r).collect();
            prop_assert_eq!(used.len(), batch.len());
        }
    }
}
