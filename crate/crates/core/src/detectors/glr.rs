use super::{
    bernoulli_kl, gaussian_kl, DetectionOutcome, DetectorConfig, Divergence, ScalarHistory, SplitGrid, TestKind,
};

/// Relative and absolute slack on screening bounds, covering rounding in the
/// leading-part prefix sums they are computed from.
const REL_SLACK: f64 = 1e-9;
const ABS_SLACK: f64 = 1e-12;

/// Calls `f(t)` for every split of an `n`-sample history on `grid`, in increasing order.
#[inline]
pub(crate) fn for_each_split(grid: SplitGrid, n: usize, mut f: impl FnMut(usize)) {
    if n < 2 {
        return;
    }
    match grid {
        SplitGrid::Exhaustive => (1..n).for_each(f),
        SplitGrid::Stride(k) => {
            let k = k.max(1);
            let mut t = k;
            while t < n - 1 {
                f(t);
                t += k;
            }
            f(n - 1);
        }
        SplitGrid::Geometric => {
            let mut off = 1usize << (usize::BITS - 1 - (n - 1).leading_zeros());
            while off >= 1 {
                f(n - off);
                off >>= 1;
            }
        }
    }
}

/// Split statistic `t kl(mu_{1:t}, mu) + (n - t) kl(mu_{t+1:n}, mu)`.
#[inline]
fn stat_at(h: &ScalarHistory, t: usize, mu: f64, div: Divergence, eps: f64) -> f64 {
    let n = h.len();
    let m1 = h.mean(1, t);
    let m2 = h.mean(t + 1, n);
    let (a, b) = (t as f64, (n - t) as f64);
    match div {
        Divergence::Bernoulli => a * bernoulli_kl(m1, mu, eps) + b * bernoulli_kl(m2, mu, eps),
        Divergence::Gaussian { variance } => a * gaussian_kl(m1, mu, variance) + b * gaussian_kl(m2, mu, variance),
    }
}

/// The split statistic at `t` under `cfg`'s divergence. Requires `1 <= t < n`.
pub fn split_statistic(h: &ScalarHistory, t: usize, cfg: &DetectorConfig) -> f64 {
    assert!(t >= 1 && t < h.len(), "split {t} outside [1, {})", h.len());
    stat_at(h, t, h.total_mean(), cfg.divergence, cfg.clamp_eps)
}

/// Arg-max over the grid of `d_t^2 / (t (n - t))` with `d_t = S_t - t mu`,
/// compared by cross-multiplication. Returns `(d^2, t (n - t), t)`.
#[inline]
fn cusum_argmax(prefix: &[f64], n: usize, mu: f64, grid: SplitGrid) -> (f64, f64, usize) {
    let nf = n as f64;
    let (mut best_num, mut best_den, mut best_t) = (-1.0, 1.0, 1);
    for_each_split(grid, n, |t| {
        let tf = t as f64;
        let d = prefix[t] - tf * mu;
        let num = d * d;
        let den = tf * (nf - tf);
        if num * best_den > best_num * den {
            best_num = num;
            best_den = den;
            best_t = t;
        }
    });
    (best_num, best_den, best_t)
}

fn interior(mu: f64, eps: f64) -> bool {
    mu > eps && mu < 1.0 - eps
}

/// Upper bound on the largest Bernoulli split statistic from the chi-square
/// inequality `kl(x, y) <= (x - y)^2 / (y (1 - y))`, plus the split attaining it.
fn chi_square_bound(h: &ScalarHistory, mu: f64, grid: SplitGrid) -> (f64, usize) {
    let n = h.len();
    let (num, den, t) = cusum_argmax(h.prefix(), n, mu, grid);
    (n as f64 * num / (den * mu * (1.0 - mu)), t)
}

/// Exact first arg-max of the Bernoulli statistic. Splits whose bound
/// `kl(x, y) <= (x - y)^2 / (2 min(x(1-x), y(1-y)))` falls below the statistic
/// at `seed` cannot win and are skipped.
fn bernoulli_pruned_max(h: &ScalarHistory, mu: f64, grid: SplitGrid, eps: f64, seed: usize) -> (f64, usize) {
    let n = h.len();
    let prefix = h.prefix();
    let floor = stat_at(h, seed, mu, Divergence::Bernoulli, eps);
    let (nf, sn, v) = (n as f64, prefix[n], mu * (1.0 - mu));
    let (mut best, mut best_t) = (f64::NEG_INFINITY, seed);
    for_each_split(grid, n, |t| {
        let tf = t as f64;
        let st = prefix[t];
        let d = st - tf * mu;
        let (r, u) = (sn - st, nf - tf);
        let c1 = (st * (tf - st)).min(tf * tf * v).max(0.0);
        let c2 = (r * (u - r)).min(u * u * v).max(0.0);
        let lhs = d * d * (tf * c2 + u * c1) * (1.0 + REL_SLACK) + 2.0 * ABS_SLACK * c1 * c2;
        if lhs >= 2.0 * floor * c1 * c2 {
            let s = stat_at(h, t, mu, Divergence::Bernoulli, eps);
            if s > best {
                best = s;
                best_t = t;
            }
        }
    });
    (best, best_t)
}

fn exact_scan(h: &ScalarHistory, mu: f64, cfg: &DetectorConfig) -> (f64, Option<usize>) {
    let (mut best, mut best_t) = (f64::NEG_INFINITY, None);
    for_each_split(cfg.grid, h.len(), |t| {
        let s = stat_at(h, t, mu, cfg.divergence, cfg.clamp_eps);
        if s > best {
            best = s;
            best_t = Some(t);
        }
    });
    (best, best_t)
}

/// Largest split statistic over the configured grid and its first arg-max.
/// Histories with fewer than two samples give `(0, None)`.
pub fn glr_statistic(h: &ScalarHistory, cfg: &DetectorConfig) -> (f64, Option<usize>) {
    let n = h.len();
    if n < 2 {
        return (0.0, None);
    }
    let mu = h.total_mean();
    match cfg.divergence {
        Divergence::Bernoulli if interior(mu, cfg.clamp_eps) => {
            let (num, _, seed) = cusum_argmax(h.prefix(), n, mu, cfg.grid);
            if num == 0.0 {
                // every prefix sits exactly on the mean
                let mut first = 0;
                for_each_split(cfg.grid, n, |t| {
                    if first == 0 {
                        first = t;
                    }
                });
                return exact_scan_from(h, mu, cfg, first);
            }
            let (s, t) = bernoulli_pruned_max(h, mu, cfg.grid, cfg.clamp_eps, seed);
            (s, Some(t))
        }
        _ => exact_scan(h, mu, cfg),
    }
}

fn exact_scan_from(h: &ScalarHistory, mu: f64, cfg: &DetectorConfig, t: usize) -> (f64, Option<usize>) {
    let first = stat_at(h, t, mu, cfg.divergence, cfg.clamp_eps);
    if first == 0.0 {
        return (0.0, Some(t));
    }
    exact_scan(h, mu, cfg)
}

/// Threshold the configured rule assigns to an `n`-sample history.
pub fn threshold(n: usize, cfg: &DetectorConfig) -> f64 {
    cfg.threshold.value(n, cfg.delta_f)
}

fn screened(bound: f64, thr: f64) -> bool {
    bound < thr * (1.0 - REL_SLACK) - ABS_SLACK
}

/// GLR test: triggers iff the largest split statistic reaches the threshold.
pub fn glr_test(h: &ScalarHistory, cfg: &DetectorConfig) -> DetectionOutcome {
    let n = h.len();
    let thr = threshold(n, cfg);
    if n < 2 {
        return DetectionOutcome::quiet(thr);
    }
    let mu = h.total_mean();
    if cfg.screening && cfg.divergence == Divergence::Bernoulli && interior(mu, cfg.clamp_eps) {
        let (bound, seed) = chi_square_bound(h, mu, cfg.grid);
        if screened(bound, thr) {
            return DetectionOutcome {
                triggered: false,
                best_split: None,
                best_statistic: bound,
                threshold_used: thr,
                screened: true,
            };
        }
        let (s, t) = bernoulli_pruned_max(h, mu, cfg.grid, cfg.clamp_eps, seed);
        return DetectionOutcome::decide(s, Some(t), thr);
    }
    let (s, t) = glr_statistic(h, cfg);
    DetectionOutcome::decide(s, t, thr)
}

/// Shiryaev-Roberts variant: triggers iff `ln sum_t exp(stat_t) >= beta(n) + ln n`.
/// The reported statistic is the log-sum-exp; the split is the largest term.
pub fn gsr_test(h: &ScalarHistory, cfg: &DetectorConfig) -> DetectionOutcome {
    let n = h.len();
    let thr = threshold(n, cfg) + (n.max(1) as f64).ln();
    if n < 2 {
        return DetectionOutcome::quiet(thr);
    }
    let mu = h.total_mean();
    let beta = threshold(n, cfg);
    if cfg.screening && cfg.divergence == Divergence::Bernoulli && interior(mu, cfg.clamp_eps) {
        let (bound, _) = chi_square_bound(h, mu, cfg.grid);
        if screened(bound, beta) {
            let mut splits = 0usize;
            for_each_split(cfg.grid, n, |_| splits += 1);
            return DetectionOutcome {
                triggered: false,
                best_split: None,
                best_statistic: bound + (splits as f64).ln(),
                threshold_used: thr,
                screened: true,
            };
        }
    }
    let (mut max, mut arg, mut acc) = (f64::NEG_INFINITY, None, 0.0);
    for_each_split(cfg.grid, n, |t| {
        let s = stat_at(h, t, mu, cfg.divergence, cfg.clamp_eps);
        if s > max {
            acc = acc * (max - s).exp() + 1.0;
            max = s;
            arg = Some(t);
        } else {
            acc += (s - max).exp();
        }
    });
    DetectionOutcome::decide(max + acc.ln(), arg, thr)
}

/// Dispatches on `cfg.test`.
pub fn run_test(h: &ScalarHistory, cfg: &DetectorConfig) -> DetectionOutcome {
    match cfg.test {
        TestKind::Glr => glr_test(h, cfg),
        TestKind::Gsr => gsr_test(h, cfg),
    }
}
