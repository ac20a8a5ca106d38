"""Linear-chain CRF core: scoring, forward-backward, Viterbi, gradients.

Labels are indexed O=0, B=1, I=2.  A sequence is scored as the sum of
per-token emission scores (sum of active feature weights per label) plus
label-to-label transition scores.  Transitions forbid nothing a priori:
invalid IOB moves (start->I, O->I) are discouraged by learned transitions
and hard-masked only at decode time, so marginal probabilities come from
the unmasked distribution.
"""

from __future__ import annotations

import numpy as np

LABELS = ("O", "B", "I")
L_O, L_B, L_I = 0, 1, 2
NUM_LABELS = len(LABELS)

_NEG_INF = -np.inf


def logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax), axis=axis, keepdims=True)) + amax
    return float(out.reshape(())) if axis is None else np.squeeze(out, axis=axis)


def emission_scores(feats: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """Per-token label scores: sum of the rows of ``weights`` a token activates."""
    em = np.zeros((len(feats), NUM_LABELS))
    for t, f in enumerate(feats):
        if f.size:
            em[t] = weights[f].sum(axis=0)
    return em


def sequence_score(em: np.ndarray, trans: np.ndarray, labels: np.ndarray) -> float:
    score = em[np.arange(len(labels)), labels].sum()
    if len(labels) > 1:
        score += trans[labels[:-1], labels[1:]].sum()
    return float(score)


def forward_backward(em: np.ndarray, trans: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Log-space forward/backward tables and the log partition function."""
    n = em.shape[0]
    log_alpha = np.empty((n, NUM_LABELS))
    log_beta = np.empty((n, NUM_LABELS))
    log_alpha[0] = em[0]
    for t in range(1, n):
        log_alpha[t] = em[t] + logsumexp(log_alpha[t - 1][:, None] + trans, axis=0)
    log_beta[n - 1] = 0.0
    for t in range(n - 2, -1, -1):
        log_beta[t] = logsumexp(trans + (em[t + 1] + log_beta[t + 1])[None, :], axis=1)
    return log_alpha, log_beta, float(logsumexp(log_alpha[n - 1]))


def marginals(em: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Per-token label marginals P(y_t = l); rows sum to 1."""
    if em.shape[0] == 0:
        return np.zeros((0, NUM_LABELS))
    log_alpha, log_beta, log_z = forward_backward(em, trans)
    return np.exp(log_alpha + log_beta - log_z)


def viterbi(em: np.ndarray, trans: np.ndarray) -> list[int]:
    """Best label sequence with invalid IOB moves (start->I, O->I) masked out.

    The mask guarantees the output is always a valid IOB sequence.
    """
    n = em.shape[0]
    if n == 0:
        return []
    masked_trans = trans.copy()
    masked_trans[L_O, L_I] = _NEG_INF
    score = em[0].copy()
    score[L_I] = _NEG_INF
    back = np.empty((n, NUM_LABELS), dtype=np.intp)
    for t in range(1, n):
        cand = score[:, None] + masked_trans
        back[t] = np.argmax(cand, axis=0)
        score = em[t] + np.max(cand, axis=0)
    path = [int(np.argmax(score))]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path


def neg_log_likelihood(
    seqs: list[tuple[list[np.ndarray], np.ndarray]],
    weights: np.ndarray,
    trans: np.ndarray,
    l2: float = 0.0,
) -> float:
    """Mean per-sequence NLL over ``seqs`` plus an L2 penalty on all parameters."""
    total = 0.0
    for feats, labels in seqs:
        em = emission_scores(feats, weights)
        _, _, log_z = forward_backward(em, trans)
        total += log_z - sequence_score(em, trans, labels)
    nll = total / max(1, len(seqs))
    if l2:
        nll += 0.5 * l2 * (float(np.sum(weights**2)) + float(np.sum(trans**2)))
    return nll


def nll_gradients(
    seqs: list[tuple[list[np.ndarray], np.ndarray]],
    weights: np.ndarray,
    trans: np.ndarray,
    l2: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """NLL and its gradients: expected minus empirical feature counts.

    Returns (nll, grad_weights, grad_transitions), averaged over the batch,
    with the L2 term included in both the value and the gradients.
    """
    g_w = np.zeros_like(weights)
    g_t = np.zeros_like(trans)
    total = 0.0
    for feats, labels in seqs:
        n = len(feats)
        em = emission_scores(feats, weights)
        log_alpha, log_beta, log_z = forward_backward(em, trans)
        total += log_z - sequence_score(em, trans, labels)
        node = np.exp(log_alpha + log_beta - log_z)
        for t, f in enumerate(feats):
            if f.size:
                np.add.at(g_w, f, node[t])
                g_w[f, labels[t]] -= 1.0
        if n > 1:
            for t in range(1, n):
                pair = np.exp(
                    log_alpha[t - 1][:, None]
                    + trans
                    + (em[t] + log_beta[t])[None, :]
                    - log_z
                )
                g_t += pair
                g_t[labels[t - 1], labels[t]] -= 1.0
    m = max(1, len(seqs))
    nll = total / m
    g_w /= m
    g_t /= m
    if l2:
        nll += 0.5 * l2 * (float(np.sum(weights**2)) + float(np.sum(trans**2)))
        g_w += l2 * weights
        g_t += l2 * trans
    return nll, g_w, g_t
