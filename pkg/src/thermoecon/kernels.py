"""Hot inner loops of the exchange simulator.

Every kernel is compiled with numba's @njit when available; setting the
environment variable THERMOECON_NUMBA=0 (before import) selects a pure-NumPy
fallback running the identical source.  Numba's random streams differ from
NumPy's, so trajectories are bit-reproducible per (seed, backend), not
across backends; ``backend_name()`` is recorded in run manifests.

All kernels seed the backend RNG on entry, mutate holdings in place and
leave pair totals exactly conserved (floating-point sum/re-split).
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("THERMOECON_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _env not in ("0", "false", "off", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "python"


MAX_SEED = 2 ** 31 - 1


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def _beta_open(a, b):
    # rejects draws that round to exactly 0 or 1; returns (draw, rejections)
    rej = 0
    x = np.random.beta(a, b)
    while x <= 0.0 or x >= 1.0:
        rej += 1
        x = np.random.beta(a, b)
    return x, rej


@njit(cache=True)
def _uniform_pair(n):
    i = np.random.randint(0, n)
    j = np.random.randint(0, n - 1)
    if j >= i:
        j += 1
    return i, j


@njit(cache=True)
def _pair_exchange(m, g, alpha, eta, i, j):
    # conditional re-split of the pair's pooled money and each pooled good
    rej = 0
    for q in range(g.shape[1]):
        x, r = _beta_open(alpha[i, q], alpha[j, q])
        rej += r
        tot = g[i, q] + g[j, q]
        g[i, q] = x * tot
        g[j, q] = tot - g[i, q]
    y, r = _beta_open(eta[i], eta[j])
    rej += r
    tot = m[i] + m[j]
    m[i] = y * tot
    m[j] = tot - m[i]
    return rej


@njit(cache=True)
def _pick_edge(edge_i, edge_j, edge_cum, n):
    if edge_cum.size == 0:
        return _uniform_pair(n)
    r = np.random.random() * edge_cum[edge_cum.size - 1]
    k = np.searchsorted(edge_cum, r)
    if k >= edge_i.size:
        k = edge_i.size - 1
    return edge_i[k], edge_j[k]


@njit(cache=True)
def k_evolve(m, g, alpha, eta, edge_i, edge_j, edge_cum, n_events, seed):
    """Random-scan Gibbs exchange; empty edge arrays mean complete graph."""
    _seed(seed)
    n = m.shape[0]
    rej = 0
    for _ in range(n_events):
        i, j = _pick_edge(edge_i, edge_j, edge_cum, n)
        rej += _pair_exchange(m, g, alpha, eta, i, j)
    return rej


@njit(cache=True)
def k_evolve_record(m, g, alpha, eta, edge_i, edge_j, edge_cum,
                    thin, rec_m, rec_g, seed):
    """Evolve thin*nrec events, snapshotting holdings every `thin` events."""
    _seed(seed)
    n = m.shape[0]
    rej = 0
    n_rec = rec_m.shape[0]
    record_goods = rec_g.size > 0
    for s in range(n_rec):
        for _ in range(thin):
            i, j = _pick_edge(edge_i, edge_j, edge_cum, n)
            rej += _pair_exchange(m, g, alpha, eta, i, j)
        for a in range(n):
            rec_m[s, a] = m[a]
        if record_goods:
            for a in range(n):
                for q in range(g.shape[1]):
                    rec_g[s, a, q] = g[a, q]
    return rej


@njit(cache=True)
def _line_trade_logpdf(d, gi, gj, mi, mj, ea, eb, aa, ab, price):
    out = 0.0
    if aa != 1.0:
        out += (aa - 1.0) * np.log(gi + d)
    if ab != 1.0:
        out += (ab - 1.0) * np.log(gj - d)
    if ea != 1.0:
        out += (ea - 1.0) * np.log(mi - price * d)
    if eb != 1.0:
        out += (eb - 1.0) * np.log(mj + price * d)
    return out


@njit(cache=True)
def _line_trade(m_a, g_a, m_b, g_b, ia, jb, aa, ab, ea, eb, price, good):
    """Joint re-split of one good plus money along a budget line at `price`
    between agent ia of economy A and jb of economy B.  Samples the
    conditional density by rejection under a uniform envelope at the mode
    (log-concave for exponents >= 1).  Returns goods moved A->B."""
    gi = g_a[ia, good]
    gj = g_b[jb, good]
    mi = m_a[ia]
    mj = m_b[jb]
    lo = max(-gi, -mj / price)
    hi = min(gj, mi / price)
    if hi - lo <= 0.0:
        return 0.0
    pad = 1e-12 * (hi - lo)
    lo += pad
    hi -= pad
    # derivative of the log-density is decreasing: bisect for the mode
    a, b = lo, hi
    for _ in range(60):
        mid = 0.5 * (a + b)
        der = 0.0
        der += (aa - 1.0) / (gi + mid)
        der -= (ab - 1.0) / (gj - mid)
        der -= price * (ea - 1.0) / (mi - price * mid)
        der += price * (eb - 1.0) / (mj + price * mid)
        if der > 0.0:
            a = mid
        else:
            b = mid
    log_max = _line_trade_logpdf(0.5 * (a + b), gi, gj, mi, mj, ea, eb, aa, ab, price)
    d = 0.0
    accepted = False
    for _ in range(200):
        cand = lo + (hi - lo) * np.random.random()
        u = np.random.random()
        if np.log(u) + log_max <= _line_trade_logpdf(cand, gi, gj, mi, mj, ea, eb, aa, ab, price):
            d = cand
            accepted = True
            break
    if not accepted:
        return 0.0
    # d is the change of A-agent goods; goods moved A->B is -d
    g_a[ia, good] = gi + d
    g_b[jb, good] = gj - d
    m_a[ia] = mi - price * d
    m_b[jb] = mj + price * d
    return -d


@njit(cache=True)
def k_contact_evolve(m_a, g_a, alpha_a, eta_a, m_b, g_b, alpha_b, eta_b,
                     w_int_a, w_int_b, w_money, w_goods, w_trade, trade_price,
                     n_events, thin, rec_ma, rec_ga, seed):
    """Two economies in contact.  Event mix by weights: internal exchange in
    A or B, cross money re-split, cross goods re-split, cross budget-line
    trade at `trade_price`.  Records totals (M_A, G_A per good) every `thin`
    events when recording arrays are non-empty.  Returns (rejections,
    money flux A->B, goods[0] flux A->B)."""
    _seed(seed)
    na = m_a.shape[0]
    nb = m_b.shape[0]
    ng = g_a.shape[1]
    w_tot = w_int_a + w_int_b + w_money + w_goods + w_trade
    rej = 0
    s = 0
    money_out = 0.0
    goods_out = 0.0
    record = rec_ma.size > 0
    for ev in range(n_events):
        r = np.random.random() * w_tot
        if r < w_int_a:
            i, j = _uniform_pair(na)
            rej += _pair_exchange(m_a, g_a, alpha_a, eta_a, i, j)
        elif r < w_int_a + w_int_b:
            i, j = _uniform_pair(nb)
            rej += _pair_exchange(m_b, g_b, alpha_b, eta_b, i, j)
        elif r < w_int_a + w_int_b + w_money:
            i = np.random.randint(0, na)
            j = np.random.randint(0, nb)
            y, rr = _beta_open(eta_a[i], eta_b[j])
            rej += rr
            tot = m_a[i] + m_b[j]
            new_a = y * tot
            money_out += m_a[i] - new_a
            m_a[i] = new_a
            m_b[j] = tot - new_a
        elif r < w_int_a + w_int_b + w_money + w_goods:
            i = np.random.randint(0, na)
            j = np.random.randint(0, nb)
            q = np.random.randint(0, ng)
            x, rr = _beta_open(alpha_a[i, q], alpha_b[j, q])
            rej += rr
            tot = g_a[i, q] + g_b[j, q]
            new_a = x * tot
            if q == 0:
                goods_out += g_a[i, q] - new_a
            g_a[i, q] = new_a
            g_b[j, q] = tot - new_a
        else:
            i = np.random.randint(0, na)
            j = np.random.randint(0, nb)
            moved = _line_trade(m_a, g_a, m_b, g_b, i, j,
                                alpha_a[i, 0], alpha_b[j, 0],
                                eta_a[i], eta_b[j], trade_price, 0)
            goods_out += moved
            money_out -= moved * trade_price
        if record and (ev + 1) % thin == 0 and s < rec_ma.shape[0]:
            tot_m = 0.0
            for a in range(na):
                tot_m += m_a[a]
            rec_ma[s] = tot_m
            for q in range(ng):
                tot_g = 0.0
                for a in range(na):
                    tot_g += g_a[a, q]
                rec_ga[s, q] = tot_g
            s += 1
    return rej, money_out, goods_out


@njit(cache=True)
def k_price_drift(m, g, alpha, eta, good, mu, n_samples, n_mix, seed, out):
    """Prospective one-encounter goods drift at posted price mu.

    Each sample: mix `n_mix` internal exchange events, pick an agent
    uniformly, and record the expected-trade draw delta_g = x*(g + m/mu) - g
    WITHOUT applying it, so the macro-state stays at its stated totals."""
    _seed(seed)
    n = m.shape[0]
    rej = 0
    for s in range(n_samples):
        for _ in range(n_mix):
            i, j = _uniform_pair(n)
            rej += _pair_exchange(m, g, alpha, eta, i, j)
        i = np.random.randint(0, n)
        w = g[i, good] + m[i] / mu
        x, rr = _beta_open(alpha[i, good], eta[i])
        rej += rr
        out[s] = x * w - g[i, good]
    return rej


@njit(cache=True)
def k_trader_apply(m, g, alpha, eta, good, mu, n_enc, n_mix, eps, seed):
    """Applied budget-line trades with an external trader at price mu.

    Trades that would push holdings below the interior margin eps are
    resampled a few times then skipped.  Returns (trader money gained,
    trader goods gained, rejections, skips)."""
    _seed(seed)
    n = m.shape[0]
    d_money = 0.0
    d_goods = 0.0
    rej = 0
    skips = 0
    for _ in range(n_enc):
        for _ in range(n_mix):
            i, j = _uniform_pair(n)
            rej += _pair_exchange(m, g, alpha, eta, i, j)
        i = np.random.randint(0, n)
        w = g[i, good] + m[i] / mu
        ok = False
        g_new = g[i, good]
        for _ in range(16):
            x, rr = _beta_open(alpha[i, good], eta[i])
            rej += rr
            cand_g = x * w
            cand_m = mu * (w - cand_g)
            if cand_g > eps and cand_m > eps:
                g_new = cand_g
                ok = True
                break
        if not ok:
            skips += 1
            continue
        m_new = mu * (w - g_new)
        # trader balances: conserves money + mu*goods along the line exactly
        d_goods += g[i, good] - g_new
        d_money += m[i] - m_new
        g[i, good] = g_new
        m[i] = m_new
    return d_money, d_goods, rej, skips


@njit(cache=True)
def k_trader_gift(m, g, alpha, eta, cap, n_enc, n_mix, seed):
    """Gift/absorb channel: agent i's money resampled from density
    m'^(eta-1) on (0, cap - sum_others), by inverse-CDF of Beta(eta, 1)."""
    _seed(seed)
    n = m.shape[0]
    rej = 0
    total = 0.0
    for a in range(n):
        total += m[a]
    for _ in range(n_enc):
        for _ in range(n_mix):
            i, j = _uniform_pair(n)
            rej += _pair_exchange(m, g, alpha, eta, i, j)
        i = np.random.randint(0, n)
        upper = cap - (total - m[i])
        if upper <= 0.0:
            continue
        u = np.random.random()
        while u <= 0.0:
            u = np.random.random()
        new = upper * u ** (1.0 / eta[i])
        total += new - m[i]
        m[i] = new
    return rej
