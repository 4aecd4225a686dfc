"""Pure-Python implementations of the hot kernels.

These define the reference semantics; ``_kernels.pyx`` must agree with them
to floating-point round-off given the same inputs and random uniforms.
"""

import math

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtri, ndtri_exp

NAME = "python"

AUX = 1
LAPLACE = 2
NEWTON_TOL = 1e-10
NEWTON_MAXITER = 100


def _log_expm1(x):
    x = np.asarray(x, dtype=float)
    big = x > 50.0
    out = np.empty_like(x)
    out[big] = x[big] + np.log1p(-np.exp(-x[big]))
    out[~big] = np.log(np.expm1(x[~big]))
    return out


def _softplus(y):
    return np.where(y > 0, y + np.log1p(np.exp(-np.abs(y))), np.log1p(np.exp(np.minimum(y, 0.0))))


def _sigmoid(y):
    e = np.exp(-np.abs(y))
    return np.where(y >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _log_target(eta, prec, m, n, N, log_c):
    # coordinate full conditional up to a constant
    return -0.5 * prec * (eta - m) ** 2 + n * eta - N * _softplus(eta - log_c)


def _mode(prec, m, n, N, log_c, start):
    """Safeguarded Newton for the (unique) mode of the concave log target."""
    lo = m + (n - N) / prec
    hi = m + n / prec
    eta = np.clip(start, lo, hi)
    active = np.ones(eta.shape, dtype=bool)
    for _ in range(NEWTON_MAXITER):
        if not active.any():
            break
        s = _sigmoid(eta - log_c)
        grad = -prec * (eta - m) + n - N * s
        curv = prec + N * s * (1.0 - s)
        lo = np.where(active & (grad > 0), eta, lo)
        hi = np.where(active & (grad <= 0), eta, hi)
        step = grad / curv
        new = eta + step
        bad = (new <= lo) | (new >= hi)
        new = np.where(bad, 0.5 * (lo + hi), new)
        done = np.abs(new - eta) <= NEWTON_TOL * (1.0 + np.abs(eta))
        eta = np.where(active, new, eta)
        active &= ~done
    s = _sigmoid(eta - log_c)
    return eta, prec + N * s * (1.0 - s)


def ln_sweep(params, counts, precision, sigma0, uniforms, scheme=AUX | LAPLACE):
    """One Gibbs sweep over a logistic-normal random-walk parameter array.

    ``params`` ``[T, R, C]`` holds, for every time bin and row, the
    unnormalized log-weights of a categorical over ``C`` outcomes whose
    observed outcome ``counts`` share the layout. The prior on each
    ``params[:, r, c]`` is a Gaussian random walk (first slice
    ``Normal(0, sigma0**2)``, increments of the given precision).

    Each coordinate is updated by up to two kernels that both leave its full
    conditional invariant:

    * ``AUX``: an auxiliary uniform turns the softmax denominator into an
      upper truncation bound, so the coordinate given the auxiliary is a
      truncated Gaussian drawn by inversion.
    * ``LAPLACE``: an independence Metropolis-Hastings step proposing from
      the Gaussian matched to the mode and curvature of the (log-concave)
      conditional.

    Scan order: time bins of even then odd parity, columns ascending, all
    rows of a parity updated together (they are conditionally independent).
    ``uniforms`` ``[T, R, C, 4]`` in (0, 1] drive both kernels. Updates
    ``params`` in place and returns the number of accepted MH proposals.
    """
    x = params
    T, R, C = x.shape
    kappa = float(precision)
    tot = counts.sum(axis=2)
    accepted = 0
    for parity in (0, 1):
        ts = np.arange(parity, T, 2)
        if ts.size == 0:
            continue
        prec = (np.where(ts == 0, 1.0 / sigma0 ** 2, kappa) + np.where(ts < T - 1, kappa, 0.0))[:, None]
        prev_ok = ts > 0
        next_ok = ts < T - 1
        sd = 1.0 / np.sqrt(prec)
        N = tot[ts]
        for c in range(C):
            num = np.zeros((ts.size, R))
            num[prev_ok] += kappa * x[ts[prev_ok] - 1, :, c]
            num[next_ok] += kappa * x[ts[next_ok] + 1, :, c]
            m = num / prec
            n = counts[ts, :, c]
            u = uniforms[ts, :, c]
            eta = x[ts, :, c]
            if C == 1 or not np.any(N > 0):
                # likelihood is constant in this coordinate: exact prior draw
                x[ts, :, c] = m + sd * ndtri(u[..., 2])
                continue
            log_c = logsumexp(np.delete(x[ts], c, axis=2), axis=2)
            # Gaussian rows (no observations) get an exact draw
            gauss = N <= 0
            if scheme & AUX:
                mean = m + n / prec
                with np.errstate(divide="ignore", invalid="ignore"):
                    s = (np.logaddexp(eta, log_c) - log_c) - np.log(u[..., 0]) / N
                    bound = np.where(gauss, np.inf, log_c + _log_expm1(np.where(gauss, 1.0, s)))
                beta = (bound - mean) / sd
                eta = mean + sd * ndtri_exp(np.log(u[..., 1]) + log_ndtr(beta))
            if scheme & LAPLACE:
                mode, curv = _mode(prec, m, n, N, log_c, eta)
                tau = 1.0 / np.sqrt(curv)
                prop = mode + tau * ndtri(u[..., 2])
                log_w_new = _log_target(prop, prec, m, n, N, log_c) + 0.5 * ((prop - mode) / tau) ** 2
                log_w_old = _log_target(eta, prec, m, n, N, log_c) + 0.5 * ((eta - mode) / tau) ** 2
                acc = (np.log(u[..., 3]) < log_w_new - log_w_old) | gauss
                eta = np.where(acc, prop, eta)
                accepted += int(np.count_nonzero(acc & ~gauss))
            x[ts, :, c] = eta
    return accepted


def _sigmoid_scalar(f):
    if f > 30.0:
        f = 30.0
    elif f < -30.0:
        f = -30.0
    return 1.0 / (1.0 + math.exp(-f))


def sgns_chunk(w_in, w_out, tokens, indptr, window, negs, alpha0, min_alpha, done, total):
    """SGD over the (center, context) pairs of a chunk of sentences.

    Pairs are visited sentence by sentence, center position ascending,
    context position ascending (center excluded). ``negs`` holds one row of
    negative samples per pair in that order. Negatives equal to the context
    word are skipped. Returns the updated processed-pair counter.
    """
    p = 0
    for s in range(len(indptr) - 1):
        lo, hi = int(indptr[s]), int(indptr[s + 1])
        for i in range(lo, hi):
            center = tokens[i]
            h = w_in[center]
            for j in range(max(lo, i - window), min(hi, i + window + 1)):
                if j == i:
                    continue
                ctx = tokens[j]
                alpha = alpha0 * max(1.0 - done / total, min_alpha)
                err = np.zeros_like(h)
                targets = [(ctx, 1.0)] + [(q, 0.0) for q in negs[p] if q != ctx]
                for tgt, label in targets:
                    out = w_out[tgt]
                    g = (label - _sigmoid_scalar(float(h @ out))) * alpha
                    err += g * out
                    out += g * h
                h += err
                p += 1
                done += 1
    return done
