"""Event-driven path kernels. Between claims the paths are linear, so every
barrier hit, dividend stream and discount factor is computed exactly."""
from __future__ import annotations

import numpy as np

from ._jit import jit, pjit, prange
from .rng import next_exponential, next_uniform, stream_start

# lower-boundary modes
LOWER_ABSORB = 0
LOWER_REFLECT = 1
LOWER_CLOCK = 2  # ruin when an Exp(rate) clock rings below 0 (Parisian / Poisson-observed)
LOWER_DRAWDOWN = 3  # ruin below running maximum minus rate

# upper-boundary modes
UPPER_NONE = 0
UPPER_ABSORB = 1
UPPER_REFLECT = 2
UPPER_KILL = 3  # killed at Exp(rate) while above b

# outcome codes
CENSORED = 0.0
RUIN = 1.0
EXIT_UP = 2.0
KILLED = 3.0

N_SCALAR_OUT = 7
INF = np.inf


@jit
def sample_ph(state, m, beta_cum, rates, trans_cum):
    """Draw from an order-m phase-type law (arrays may be padded beyond m)."""
    state, u = next_uniform(state)
    i = 0
    while i < m and u > beta_cum[i]:
        i += 1
    if i == m:
        return state, 0.0
    total = 0.0
    while True:
        state, e = next_exponential(state, rates[i])
        total += e
        state, u = next_uniform(state)
        j = 0
        while j < m and u > trans_cum[i, j]:
            j += 1
        if j == m:
            return state, total
        i = j


@jit
def disc_integral(q, t1, t2):
    """int_{t1}^{t2} e^{-q s} ds."""
    if q == 0.0:
        return t2 - t1
    return (np.exp(-q * t1) - np.exp(-q * t2)) / q


@jit
def _scalar_path(state, out, x0, c, lam, beta_cum, rates, trans_cum, b, lower_mode,
                 lower_rate, upper_mode, upper_rate, q, bail_theta, t_max, level_cap):
    x = x0
    t = 0.0
    L = 0.0
    R = 0.0
    D = 0.0
    DL = 0.0
    outcome = CENSORED
    if upper_mode == UPPER_REFLECT and x > b:
        R += x - b
        D += x - b
        x = b
    while True:
        if x > level_cap:
            break
        if lam > 0.0:
            state, e = next_exponential(state, lam)
        else:
            e = INF
        horizon = False
        if t + e >= t_max:
            e = t_max - t
            horizon = True
        w = np.exp(-bail_theta * L)
        if x < 0.0:
            # below zero: only reachable in clock or drawdown-free reflect-less modes
            rec = -x / c
            state, g = next_exponential(state, lower_rate)
            if g < e and g < rec:
                t += g
                x += c * g
                outcome = RUIN
                break
            if rec <= e:
                t += rec
                x = 0.0
                continue
            t += e
            x += c * e
            if horizon:
                break
        elif upper_mode == UPPER_ABSORB:
            hit = (b - x) / c
            if hit <= e:
                t += hit
                x = b
                outcome = EXIT_UP
                break
            t += e
            x += c * e
            if horizon:
                break
        elif upper_mode == UPPER_REFLECT:
            hit = (b - x) / c
            if hit < e:
                D += w * c * disc_integral(q, t + hit, t + e)
                R += c * (e - hit)
                x = b
            else:
                x += c * e
            t += e
            if horizon:
                break
        elif upper_mode == UPPER_KILL:
            if x >= b:
                state, k = next_exponential(state, upper_rate)
                if k < e:
                    t += k
                    x += c * k
                    outcome = KILLED
                    break
                t += e
                x += c * e
            else:
                hit = (b - x) / c
                if hit < e:
                    t += hit
                    x = b
                    continue
                t += e
                x += c * e
            if horizon:
                break
        else:
            t += e
            x += c * e
            if horizon:
                break
        # claim
        state, size = sample_ph(state, rates.size, beta_cum, rates, trans_cum)
        x -= size
        if x < 0.0:
            if lower_mode == LOWER_ABSORB:
                outcome = RUIN
                break
            if lower_mode == LOWER_REFLECT:
                L += -x
                DL += np.exp(-q * t) * (-x)
                x = 0.0
    out[0] = outcome
    out[1] = t
    out[2] = x
    out[3] = D
    out[4] = R
    out[5] = L
    out[6] = DL
    return state


@pjit
def scalar_paths(n, seed, x0, c, lam, beta_cum, rates, trans_cum, b, lower_mode, lower_rate,
                 upper_mode, upper_rate, q, bail_theta, t_max, level_cap):
    """Per-path outcome rows: (code, time, level, disc. dividends, dividends, bail-outs, disc. bail-outs)."""
    out = np.empty((n, N_SCALAR_OUT))
    for i in prange(n):
        s = stream_start(seed, i)
        _scalar_path(s, out[i], x0, c, lam, beta_cum, rates, trans_cum, b, lower_mode, lower_rate,
                     upper_mode, upper_rate, q, bail_theta, t_max, level_cap)
    return out


# --------------------------------------------------------------------------
# Markov additive paths


@jit
def _pick(state, cum):
    state, u = next_uniform(state)
    j = 0
    m = cum.size
    while j < m - 1 and u > cum[j]:
        j += 1
    return state, j


@jit
def _map_path(state, out, phase, x0, c, kill, lam, claim_order, claim_beta, claim_rates, claim_trans,
              out_rate, trans_cum, jump_order, jump_beta, jump_rates, jump_trans, has_jump, b, lower_mode,
              lower_rate, upper_mode, t_max, level_cap):
    n = c.size
    x = x0
    m = x0
    t = 0.0
    logw = 0.0  # log of exp(-int kill(J_s) ds)
    outcome = CENSORED
    # out layout: code, time, level, weight, phase, dividends per phase (n)
    for j in range(n):
        out[5 + j] = 0.0
    while True:
        if x > level_cap:
            break
        ci = c[phase]
        rate = lam[phase] + out_rate[phase]
        if rate > 0.0:
            state, e = next_exponential(state, rate)
        else:
            e = INF
        horizon = False
        if t + e >= t_max:
            e = t_max - t
            horizon = True
        ki = kill[phase]
        if lower_mode == LOWER_CLOCK and x < 0.0:
            rec = -x / ci
            state, g = next_exponential(state, lower_rate)
            if g < e and g < rec:
                t += g
                x += ci * g
                logw -= ki * g
                outcome = RUIN
                break
            if rec <= e:
                t += rec
                x = 0.0
                logw -= ki * rec
                continue
            t += e
            x += ci * e
            logw -= ki * e
        elif upper_mode == UPPER_ABSORB:
            hit = (b - x) / ci
            if hit <= e:
                t += hit
                x = b
                logw -= ki * hit
                outcome = EXIT_UP
                break
            t += e
            x += ci * e
            logw -= ki * e
        elif upper_mode == UPPER_REFLECT:
            hit = (b - x) / ci
            if hit < e:
                w0 = np.exp(logw - ki * hit)
                if ki > 0.0:
                    out[5 + phase] += w0 * ci * (1.0 - np.exp(-ki * (e - hit))) / ki
                else:
                    out[5 + phase] += w0 * ci * (e - hit)
                x = b
            else:
                x += ci * e
            t += e
            logw -= ki * e
        else:
            t += e
            x += ci * e
            logw -= ki * e
        if x > m:
            m = x
        if horizon:
            break
        # event: claim within the phase or a phase transition
        state, u = next_uniform(state)
        if u * rate < lam[phase]:
            state, size = sample_ph(state, claim_order[phase], claim_beta[phase], claim_rates[phase],
                                    claim_trans[phase])
        else:
            state, nxt = _pick(state, trans_cum[phase])
            size = 0.0
            if has_jump[phase, nxt]:
                state, size = sample_ph(state, jump_order[phase, nxt], jump_beta[phase, nxt],
                                        jump_rates[phase, nxt], jump_trans[phase, nxt])
            phase = nxt
        x -= size
        floor = m - lower_rate if lower_mode == LOWER_DRAWDOWN else 0.0
        if x < floor and (lower_mode == LOWER_ABSORB or lower_mode == LOWER_DRAWDOWN):
            outcome = RUIN
            break
    out[0] = outcome
    out[1] = t
    out[2] = x
    out[3] = np.exp(logw)
    out[4] = phase
    return state


@pjit
def map_paths(n, seed, init_cum, x0, c, kill, lam, claim_order, claim_beta, claim_rates, claim_trans,
              out_rate, trans_cum, jump_order, jump_beta, jump_rates, jump_trans, has_jump, b, lower_mode,
              lower_rate, upper_mode, t_max, level_cap):
    """Rows: (code, time, level, discount weight, final phase, start phase, dividends by phase...)."""
    k = c.size
    out = np.empty((n, 5 + k + 1))
    for i in prange(n):
        s = stream_start(seed, i)
        s, p0 = _pick(s, init_cum)
        row = out[i]
        _map_path(s, row[:5 + k], p0, x0, c, kill, lam, claim_order, claim_beta, claim_rates,
                  claim_trans, out_rate, trans_cum, jump_order, jump_beta, jump_rates, jump_trans, has_jump, b, lower_mode,
                  lower_rate, upper_mode, t_max, level_cap)
        row[5 + k] = p0
    return out


# --------------------------------------------------------------------------
# CB networks with transfers


@jit
def _network_path(state, out, u0, c0, u, cs, ks, lam, order, beta, rates, trans, reset_mode,
                  reset_level, t_max, pooled_cap):
    """Network ruin time and the coupled pooled-process ruin time."""
    nsub = cs.size
    lam_tot = 0.0
    for i in range(nsub):
        lam_tot += lam[i]
    U = u.copy()
    U0 = u0
    pooled = u0
    pooled_rate = c0
    for i in range(nsub):
        pooled += ks[i] * u[i]
        pooled_rate += ks[i] * cs[i]
    t = 0.0
    tau_net = INF
    tau_pool = INF
    while True:
        state, e = next_exponential(state, lam_tot)
        if t + e > t_max:
            break
        t += e
        state, v = next_uniform(state)
        who = 0
        acc = lam[0]
        while who < nsub - 1 and v * lam_tot > acc:
            who += 1
            acc += lam[who]
        state, size = sample_ph(state, order[who], beta[who], rates[who], trans[who])
        if tau_pool == INF:
            pooled += pooled_rate * e - ks[who] * size
            if pooled < 0.0:
                tau_pool = t
        if tau_net == INF:
            U0 += c0 * e
            for i in range(nsub):
                U[i] += cs[i] * e
            U[who] -= size
            if U[who] < 0.0:
                need = -ks[who] * U[who]
                if U0 < need:
                    tau_net = t
                else:
                    U0 -= need
                    if reset_mode == 0:
                        r = 0.0
                    elif reset_mode == 1:
                        r = reset_level
                    else:
                        state, r = next_uniform(state)
                        r *= reset_level
                    r = min(r, U0 / ks[who])
                    U0 -= ks[who] * r
                    U[who] = r
        if tau_net < INF and tau_pool < INF:
            break
        if pooled > pooled_cap:
            break
    out[0] = tau_net
    out[1] = tau_pool
    return state


@pjit
def network_paths(n, seed, u0, c0, u, cs, ks, lam, order, beta, rates, trans, reset_mode, reset_level,
                  t_max, pooled_cap):
    out = np.empty((n, 2))
    for i in prange(n):
        s = stream_start(seed, i)
        _network_path(s, out[i], u0, c0, u, cs, ks, lam, order, beta, rates, trans, reset_mode,
                      reset_level, t_max, pooled_cap)
    return out
